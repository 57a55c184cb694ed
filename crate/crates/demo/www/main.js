import init, { predictCurve, fitPoints, evaluateFleet } from "./pkg/curvecast_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function plot(canvas, series) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const pts = series.flatMap((s) => s.points);
  if (pts.length === 0) return;
  const xs = pts.map((p) => p[0]);
  const ys = pts.map((p) => p[1]);
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  if (y1 === y0) { y0 -= 1; y1 += 1; }
  const pad = 40;
  const sx = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const sy = (y) => h - pad - ((y - y0) / (y1 - y0)) * (h - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#555";
  ctx.font = "11px monospace";
  ctx.fillText(y1.toFixed(2), 2, pad + 4);
  ctx.fillText(y0.toFixed(2), 2, h - pad);
  ctx.fillText(String(x0), pad, h - pad + 14);
  ctx.fillText(String(x1), w - pad - 40, h - pad + 14);
  series.forEach((s, i) => {
    ctx.strokeStyle = ctx.fillStyle = s.color;
    if (s.dots) {
      s.points.forEach(([x, y]) => ctx.fillRect(sx(x) - 1.5, sy(y) - 1.5, 3, 3));
    } else {
      ctx.beginPath();
      s.points.forEach(([x, y], k) => (k ? ctx.lineTo(sx(x), sy(y)) : ctx.moveTo(sx(x), sy(y))));
      ctx.stroke();
    }
    ctx.fillText(s.label, w - pad - 160, pad + 14 + 14 * i);
  });
}

function vline(canvas, x, label, domain) {
  if (x == null) return;
  const ctx = canvas.getContext("2d");
  const pad = 40;
  const px = pad + ((x - domain[0]) / (domain[1] - domain[0])) * (canvas.width - 2 * pad);
  ctx.strokeStyle = ctx.fillStyle = "#888";
  ctx.setLineDash([3, 3]);
  ctx.beginPath();
  ctx.moveTo(px, pad);
  ctx.lineTo(px, canvas.height - pad);
  ctx.stroke();
  ctx.setLineDash([]);
  ctx.fillText(label, px + 3, pad + 12);
}

function fail(el, e) {
  el.innerHTML = "";
  el.className = "err";
  el.textContent = String(e);
}

function runPredict() {
  const out = $("p-out");
  try {
    const r = JSON.parse(predictCurve(JSON.stringify({
      a: num("p-a"), b: num("p-b"), c: num("p-c"),
      sigma: num("p-sigma"), seed: num("p-seed"), tau: num("p-tau"),
    })));
    const canvas = $("p-plot");
    const obs = r.observations;
    // The early backbone can be far off; clip it to the observed band.
    const lo = Math.min(...obs.map((p) => p[1])) - 1;
    const hi = Math.max(...obs.map((p) => p[1])) + 2;
    const backbone = r.backbone.filter(([, y]) => y >= lo && y <= hi);
    plot(canvas, [
      { label: "observed", color: "#1f77b4", points: obs, dots: true },
      { label: "asymptote per level", color: "#ff7f0e", points: backbone },
      { label: "frozen predictor", color: "#2ca02c", points: r.predicted },
    ]);
    const domain = [obs[0][0], obs[obs.length - 1][0]];
    vline(canvas, r.plevel, "P", domain);
    vline(canvas, r.clevel, "C", domain);
    const p = r.predictor;
    out.className = "";
    out.textContent =
      `wlevel ${r.wlevel ?? "--"}  plevel ${r.plevel ?? "--"}  clevel ${r.clevel ?? "--"}\n` +
      (p ? `predictor a=${p.a.toFixed(6)} b=${p.b.toFixed(6)} c=${p.c.toFixed(6)}` : "no prediction");
  } catch (e) {
    fail(out, e);
  }
}

function runFit() {
  const out = $("f-out");
  try {
    const pts = $("f-points").value.trim().split(/\n+/).map((l) => l.trim().split(/\s+/).map(Number));
    const r = JSON.parse(fitPoints(JSON.stringify(pts)));
    const { a, b, c } = r.params;
    const x1 = Math.max(...pts.map((p) => p[0]));
    const curve = [];
    for (let k = 0; k <= 200; k++) {
      const x = pts[0][0] + ((x1 * 4 - pts[0][0]) * k) / 200;
      curve.push([x, -a * Math.pow(x, -b) + c]);
    }
    plot($("f-plot"), [
      { label: "points", color: "#1f77b4", points: pts, dots: true },
      { label: "fit", color: "#2ca02c", points: curve },
    ]);
    out.className = "";
    out.textContent = `a=${a.toFixed(6)} b=${b.toFixed(6)} c=${c.toFixed(6)} rss=${r.rss.toExponential(3)} converged=${r.converged}`;
  } catch (e) {
    fail(out, e);
  }
}

function runFleet() {
  const out = $("e-out");
  try {
    const learners = $("e-fleet").value.trim().split(/\n+/).map((l) => {
      const [name, a, b, c] = l.trim().split(/\s+/);
      return { name, a: Number(a), b: Number(b), c: Number(c) };
    });
    const r = JSON.parse(evaluateFleet(JSON.stringify({ learners, sigma: num("e-sigma"), seed: num("e-seed") })));
    const f = (v) => (v == null ? "--" : v.toFixed(2));
    const head = ["run", "plevel", "clevel", ...r.controls.map((x) => `EAc@${x}`), "MAPE", "DMR", "RR"];
    const rows = r.rows.map((row) => [
      row.name, row.plevel ?? "--", row.clevel ?? "--",
      ...row.cells.map((c) => f(c.eac)), f(row.mape), f(row.dmr), f(row.rr),
    ]);
    out.className = "";
    out.innerHTML = "<table><tr>" + head.map((h) => `<th>${h}</th>`).join("") + "</tr>" +
      rows.map((r) => "<tr>" + r.map((v) => `<td>${v}</td>`).join("") + "</tr>").join("") + "</table>";
  } catch (e) {
    fail(out, e);
  }
}

await init();
$("p-run").onclick = runPredict;
$("f-run").onclick = runFit;
$("e-run").onclick = runFleet;
runPredict();
runFit();
