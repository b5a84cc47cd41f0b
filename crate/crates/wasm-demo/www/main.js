import init, { ruinCurves, expansionCurves, policyGap } from "./pkg/robust_ruin_wasm.js";

const NODES = 801;
const COLORS = ["#1f5fbf", "#d0661a", "#2b9348", "#8e44ad"];

const VIEWS = {
  curves: {
    run: ruinCurves,
    columns: [1, 2, 3],
    names: ["robust", "trusted model", "no investment"],
    ylabel: "ruin probability",
  },
  policy: {
    run: ruinCurves,
    columns: [4, 5],
    names: ["robust investment", "non-robust investment"],
    ylabel: "amount in risky asset",
  },
  expansion: {
    run: expansionCurves,
    columns: [1, 2],
    names: ["numerical", "first-order expansion"],
    ylabel: "ruin probability",
  },
  gap: {
    run: policyGap,
    columns: [1, 2],
    names: ["optimal robust rule", "non-robust rule"],
    ylabel: "robust ruin probability",
  },
};

function column(flat, k) {
  return flat.subarray(k * NODES, (k + 1) * NODES);
}

function draw(canvas, x, series, names, ylabel) {
  const ctx = canvas.getContext("2d");
  const pad = { l: 60, r: 20, t: 20, b: 40 };
  const w = canvas.width - pad.l - pad.r;
  const h = canvas.height - pad.t - pad.b;
  let ymin = Infinity;
  let ymax = -Infinity;
  for (const s of series) {
    for (const v of s) {
      if (Number.isFinite(v)) {
        ymin = Math.min(ymin, v);
        ymax = Math.max(ymax, v);
      }
    }
  }
  if (ymax === ymin) ymax = ymin + 1;
  const x0 = x[0];
  const x1 = x[x.length - 1];
  const px = (v) => pad.l + ((v - x0) / (x1 - x0)) * w;
  const py = (v) => pad.t + (1 - (v - ymin) / (ymax - ymin)) * h;

  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#999";
  ctx.fillStyle = "#444";
  ctx.font = "12px system-ui, sans-serif";
  ctx.strokeRect(pad.l, pad.t, w, h);
  for (let i = 0; i <= 5; i++) {
    const yv = ymin + ((ymax - ymin) * i) / 5;
    const xv = x0 + ((x1 - x0) * i) / 5;
    ctx.fillText(yv.toPrecision(3), 8, py(yv) + 4);
    ctx.fillText(xv.toPrecision(3), px(xv) - 12, canvas.height - pad.b + 16);
  }
  ctx.fillText("wealth", pad.l + w / 2 - 20, canvas.height - 6);

  series.forEach((s, k) => {
    ctx.strokeStyle = COLORS[k % COLORS.length];
    ctx.lineWidth = 2;
    ctx.beginPath();
    s.forEach((v, i) => (i === 0 ? ctx.moveTo(px(x[i]), py(v)) : ctx.lineTo(px(x[i]), py(v))));
    ctx.stroke();
  });

  document.getElementById("legend").innerHTML =
    `<em>${ylabel}</em>: ` +
    names.map((n, k) => `<span style="color:${COLORS[k % COLORS.length]}">&#9644; ${n}</span>`).join("");
}

function compute() {
  const status = document.getElementById("status");
  const r = Number(document.getElementById("r").value);
  const lambda = Number(document.getElementById("lambda").value);
  const eps = Number(document.getElementById("eps").value);
  const view = VIEWS[document.getElementById("view").value];
  status.textContent = "";
  try {
    const t = performance.now();
    const flat = view.run(r, lambda, eps, NODES);
    const x = column(flat, 0);
    draw(document.getElementById("plot"), x, view.columns.map((k) => column(flat, k)), view.names, view.ylabel);
    status.style.color = "#555";
    status.textContent = `computed in ${(performance.now() - t).toFixed(0)} ms`;
  } catch (e) {
    status.style.color = "#a00";
    status.textContent = String(e);
  }
}

await init();
document.getElementById("go").addEventListener("click", compute);
document.getElementById("view").addEventListener("change", compute);
compute();
