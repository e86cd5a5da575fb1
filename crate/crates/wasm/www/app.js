import init, { entropy_decay, linear_decay, limit_sweep } from "./pkg/recomb_wasm.js";

const COLORS = ["#1b6ac9", "#d2452c", "#3a9d3a", "#8a4fbf"];

// Plots each series on a log10 y axis against a shared x axis.
function plotLog(canvas, xs, series, labels) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 40;
  ctx.clearRect(0, 0, w, h);
  const logs = series.map(s => s.map(v => Math.log10(Math.max(Math.abs(v), 1e-300))));
  const flat = logs.flat().filter(Number.isFinite);
  const lo = Math.min(...flat), hi = Math.max(...flat);
  const x0 = Math.min(...xs), x1 = Math.max(...xs);
  const px = x => pad + (w - 2 * pad) * (x - x0) / (x1 - x0 || 1);
  const py = y => h - pad - (h - 2 * pad) * (y - lo) / (hi - lo || 1);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#444";
  ctx.font = "12px sans-serif";
  ctx.fillText(`1e${hi.toFixed(1)}`, 2, pad + 4);
  ctx.fillText(`1e${lo.toFixed(1)}`, 2, h - pad + 4);
  ctx.fillText(String(x0), pad, h - pad + 16);
  ctx.fillText(String(+x1.toFixed(3)), w - pad - 20, h - pad + 16);
  logs.forEach((ys, k) => {
    ctx.strokeStyle = COLORS[k % COLORS.length];
    ctx.beginPath();
    ys.forEach((y, i) => (i ? ctx.lineTo(px(xs[i]), py(y)) : ctx.moveTo(px(xs[i]), py(y))));
    ctx.stroke();
    ctx.fillStyle = COLORS[k % COLORS.length];
    ctx.fillText(labels[k], w - pad - 140, pad + 16 * (k + 1));
  });
}

function wire(id, run) {
  const box = document.getElementById(id);
  const out = box.querySelector("pre");
  const value = name => box.querySelector(`[name=${name}]`).value;
  box.querySelector("button").addEventListener("click", () => {
    out.className = "";
    out.textContent = "running...";
    // let the message paint before the synchronous computation
    setTimeout(() => {
      const t0 = performance.now();
      try {
        out.textContent = run(value, box.querySelector("canvas")) + `\n(${(performance.now() - t0).toFixed(0)} ms)`;
      } catch (e) {
        out.className = "err";
        out.textContent = String(e);
      }
    }, 10);
  });
}

await init();

wire("entropy", (v, canvas) => {
  const r = JSON.parse(entropy_decay(+v("amplitude"), +v("t_final"), +v("nx"), +v("nv")));
  plotLog(canvas, r.times, [r.relative_entropy, r.dissipation], ["relative entropy", "|dissipation|"]);
  const drift = Math.max(...r.mass_difference.map(m => Math.abs(m - r.mass_difference[0])));
  return `rho_inf = ${r.rho_inf}\nH(0) = ${r.relative_entropy[0].toExponential(3)}, ` +
    `H(end) = ${r.relative_entropy.at(-1).toExponential(3)}\nmass drift = ${drift.toExponential(2)}`;
});

wire("linear", (v, canvas) => {
  const r = JSON.parse(linear_decay(+v("rho_inf"), +v("t_final"), +v("nx"), +v("nv")));
  const reference = r.times.map(t => r.norm[0] * Math.exp(-r.spectral_gap * t));
  plotLog(canvas, r.times, [r.norm, reference], ["|F(t)|", "exp(-gap t)"]);
  return `spectral gap = ${r.spectral_gap.toFixed(4)}\n|F(end)| = ${r.norm.at(-1).toExponential(3)}`;
});

wire("limit", (v, canvas) => {
  const eps = new Float64Array(v("eps").split(",").map(Number));
  const r = JSON.parse(limit_sweep(eps, +v("nx"), +v("nv")));
  const ok = r.entries.filter(e => e.failure === null);
  plotLog(canvas, ok.map(e => e.eps), [ok.map(e => e.err_sup), ok.map(e => e.sqrt_defect)], ["sup error", "sqrt defect"]);
  return r.entries
    .map(e => `eps ${e.eps}: err_sup ${e.err_sup.toExponential(3)}` + (e.order == null ? "" : `, order ${e.order.toFixed(2)}`) + (e.failure ? ` FAILED ${e.failure}` : ""))
    .join("\n");
});
