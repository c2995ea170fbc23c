import init, { accuracyTraces, compressValues, boundCurve } from "./pkg/comrade_web.js";

const $ = (id) => document.getElementById(id);

function plotLines(canvas, series, colors, yMin, yMax) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const pad = 30;
  const len = Math.max(...series.map((s) => s.length));
  const x = (i) => pad + (i / Math.max(1, len - 1)) * (w - 2 * pad);
  const y = (v) => h - pad - ((v - yMin) / (yMax - yMin || 1)) * (h - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#333";
  ctx.fillText(yMax.toPrecision(3), 2, pad + 4);
  ctx.fillText(yMin.toPrecision(3), 2, h - pad);
  series.forEach((s, k) => {
    ctx.strokeStyle = colors[k];
    ctx.beginPath();
    s.forEach((v, i) => (i ? ctx.lineTo(x(i), y(v)) : ctx.moveTo(x(i), y(v))));
    ctx.stroke();
  });
}

function runTraces() {
  $("run-err").textContent = "";
  const T = +$("iters").value;
  try {
    const v = accuracyTraces(4000, 20, +$("m").value, +$("alpha").value, $("attack").value, $("comp").value, T, 7);
    const a = Array.from(v.slice(0, T));
    const b = Array.from(v.slice(T));
    plotLines($("acc"), [a, b], ["#1f5fbf", "#c0392b"], Math.min(0.4, ...a, ...b), 1);
  } catch (e) {
    $("run-err").textContent = e.message ?? e;
  }
}

function runCompress() {
  const out = $("comp-out");
  const x = $("vec").value.split(",").map(Number);
  try {
    const r = Array.from(compressValues(new Float64Array(x), $("spec").value, 1));
    const bits = r.pop();
    const rho = r.pop();
    out.textContent = `Q(x) = [${r.map((v) => +v.toFixed(4)).join(", ")}]  rho = ${rho.toFixed(4)}  bits = ${bits} (uncompressed ${64 * x.length})`;
    const ctx = $("bars").getContext("2d");
    const { width: w, height: h } = $("bars");
    ctx.clearRect(0, 0, w, h);
    const top = Math.max(...x.map(Math.abs), ...r.map(Math.abs)) || 1;
    const bw = w / x.length / 2.5;
    x.forEach((v, i) => {
      const cx = (i + 0.5) * (w / x.length);
      [[v, "#bbb", -bw], [r[i], "#1f5fbf", 0]].forEach(([val, col, off]) => {
        ctx.fillStyle = col;
        const bh = (val / top) * (h / 2 - 5);
        ctx.fillRect(cx + off, h / 2 - Math.max(bh, 0), bw, Math.abs(bh));
      });
    });
  } catch (e) {
    out.innerHTML = `<span class="err">${e.message ?? e}</span>`;
  }
}

function runCurve() {
  $("curve-err").textContent = "";
  try {
    const c = Array.from(boundCurve(+$("beta").value, +$("kappa").value, 1, 0.5, 0.2, 20, +$("rho").value, 60));
    const byz = [], comp = [];
    for (let i = 0; i < c.length; i += 3) { byz.push(c[i + 1]); comp.push(c[i + 2]); }
    plotLines($("bound"), [byz, comp], ["#1f5fbf", "#c0392b"], 0, Math.max(...comp, ...byz));
  } catch (e) {
    $("curve-err").textContent = e.message ?? e;
  }
}

await init();
$("run").onclick = runTraces;
$("compress").onclick = runCompress;
$("curve").onclick = runCurve;
runTraces();
runCompress();
runCurve();
