import init, { fixtureFiles, learningCurves, violationExplorer, samplePreview } from "./pkg/qcbn_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function fail(el, e) {
  el.textContent = String(e.message ?? e);
  el.className = "error";
}

function plot(canvas, series, { logY = false, hline = null } = {}) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 44;
  ctx.clearRect(0, 0, w, h);
  const tf = (y) => (logY ? Math.log10(Math.max(y, 1e-12)) : y);
  const ys = series.flatMap((s) => s.ys.filter((y) => y !== null).map(tf));
  if (hline !== null) ys.push(tf(hline));
  let lo = Math.min(...ys), hi = Math.max(...ys);
  if (hi - lo < 1e-9) { lo -= 0.5; hi += 0.5; }
  const n = Math.max(...series.map((s) => s.ys.length)) - 1 || 1;
  const px = (i) => pad + (i / n) * (w - pad - 10);
  const py = (y) => h - pad / 2 - ((tf(y) - lo) / (hi - lo)) * (h - pad);

  ctx.strokeStyle = "#999";
  ctx.fillStyle = "#555";
  ctx.font = "11px sans-serif";
  ctx.beginPath(); ctx.moveTo(pad, 5); ctx.lineTo(pad, h - pad / 2); ctx.lineTo(w - 10, h - pad / 2); ctx.stroke();
  for (const t of [lo, (lo + hi) / 2, hi]) {
    const label = logY ? `1e${t.toFixed(1)}` : t.toFixed(3);
    const yy = h - pad / 2 - ((t - lo) / (hi - lo)) * (h - pad);
    ctx.fillText(label, 2, yy + 4);
  }
  ctx.fillText(String(n), w - 30, h - 4);

  if (hline !== null) {
    ctx.strokeStyle = "#aaa";
    ctx.setLineDash([]);
    ctx.beginPath(); ctx.moveTo(pad, py(hline)); ctx.lineTo(w - 10, py(hline)); ctx.stroke();
  }
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.setLineDash(s.dash ?? []);
    ctx.beginPath();
    s.ys.forEach((y, i) => (i ? ctx.lineTo(px(i), py(y)) : ctx.moveTo(px(i), py(y))));
    ctx.stroke();
  }
  ctx.setLineDash([]);
}

function runCurves() {
  const msg = $("c-msg");
  msg.className = "";
  msg.textContent = "running...";
  setTimeout(() => {
    try {
      const r = JSON.parse(learningCurves($("c-fixture").value, num("c-count"), num("c-iters"), num("c-weight"), num("c-seed")));
      const em = r.curves["em"], qc = r.curves["em-qc"];
      plot($("c-nll"), [
        { ys: em.test, color: "#1f77b4" },
        { ys: qc.test, color: "#d62728" },
        { ys: em.train, color: "#1f77b4", dash: [5, 4] },
        { ys: qc.train, color: "#d62728", dash: [5, 4] },
      ], { hline: r.baseline.test });
      plot($("c-viol"), [
        { ys: em.violation, color: "#1f77b4" },
        { ys: qc.violation, color: "#d62728" },
      ], { logY: true });
      const last = em.test.length - 1;
      msg.textContent = `final test NLL per case: em ${em.test[last].toFixed(4)}, em-qc ${qc.test[last].toFixed(4)}, ` +
        `generating network ${r.baseline.test.toFixed(4)}; final violation: em ${em.violation[last].toExponential(2)}, ` +
        `em-qc ${qc.violation[last].toExponential(2)}`;
    } catch (e) {
      fail(msg, e);
    }
  }, 10);
}

function loadFixture() {
  const f = JSON.parse(fixtureFiles($("v-fixture").value));
  $("v-network").value = f.network;
  $("v-constraints").value = f.constraints;
  check();
}

function check() {
  const summary = $("v-summary");
  const table = $("v-table");
  summary.className = "";
  table.innerHTML = "";
  try {
    const r = JSON.parse(violationExplorer($("v-network").value, $("v-constraints").value));
    summary.textContent = `violation index ${r.total.toPrecision(6)} over ${r.inequalities} inequalities; ` +
      `${r.violated_count} violated` + (r.essentially_zero ? " (essentially zero)" : "");
    if (r.violated.length) {
      const head = ["child", "parent", "sign", "m", "i", "j", "context", "slack", "partial"];
      table.insertAdjacentHTML("beforeend", `<tr>${head.map((h) => `<th>${h}</th>`).join("")}</tr>`);
      for (const q of r.violated) {
        const cells = [q.child, q.parent, q.sign, q.m, q.i, q.j, q.context.join("; "), q.slack.toFixed(5), q.partial.toFixed(5)];
        const tr = document.createElement("tr");
        for (const c of cells) {
          const td = document.createElement("td");
          td.textContent = c;
          tr.appendChild(td);
        }
        table.appendChild(tr);
      }
    }
  } catch (e) {
    fail(summary, e);
  }
}

function sample() {
  const out = $("s-out");
  out.className = "";
  try {
    out.textContent = samplePreview($("s-fixture").value, num("s-count"), num("s-seed"), $("s-hidden").checked);
  } catch (e) {
    fail(out, e);
  }
}

await init();
$("c-run").onclick = runCurves;
$("v-load").onclick = loadFixture;
$("v-check").onclick = check;
$("s-run").onclick = sample;
loadFixture();
sample();
