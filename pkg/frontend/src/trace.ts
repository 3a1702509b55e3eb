// Decode-trace chart: corrected temperature (green) and the sliding
// novelty-window value (orange) over token positions, with tokens as the
// x-axis labels and a dashed line marking the temperature floor. Steps
// where the temperature sits on the floor are flagged so clamping is
// visible at a glance.

import type { Trace } from "./types.js";

export class TraceShapeError extends Error {}

export interface TraceChartModel {
  labels: string[];
  tau: number[];
  window: number[];
  tauFloor: number;
  floorSteps: number[]; // indices where tau == floor (clamped)
  yMax: number;
}

export function traceChartModel(trace: Trace, tauFloor = 0.1): TraceChartModel {
  const n = trace.tokens.length;
  if (trace.tau.length !== n || trace.window.length !== n) {
    throw new TraceShapeError(
      `trace arrays disagree: ${n} tokens, ${trace.tau.length} tau, ${trace.window.length} window`,
    );
  }
  const eps = 1e-9;
  const floorSteps = trace.tau
    .map((v, i) => (Math.abs(v - tauFloor) < eps ? i : -1))
    .filter((i) => i >= 0);
  const yMax = Math.max(1, ...trace.tau, ...trace.window) * 1.1;
  return { labels: [...trace.tokens], tau: [...trace.tau], window: [...trace.window], tauFloor, floorSteps, yMax };
}

const SVG_NS = "http://www.w3.org/2000/svg";
const HEIGHT = 180;
const PAD = { left: 34, right: 8, top: 8, bottom: 46 };

export function renderTraceSvg(model: TraceChartModel, doc: Document = document): SVGSVGElement {
  const n = model.labels.length;
  const stepW = 34;
  const width = PAD.left + PAD.right + Math.max(1, n - 1) * stepW + 12;
  const svg = doc.createElementNS(SVG_NS, "svg") as SVGSVGElement;
  svg.setAttribute("viewBox", `0 0 ${width} ${HEIGHT}`);
  svg.setAttribute("class", "trace-chart");
  svg.setAttribute("role", "img");

  const x = (i: number) => PAD.left + i * stepW;
  const y = (v: number) => PAD.top + (HEIGHT - PAD.top - PAD.bottom) * (1 - v / model.yMax);

  const floor = doc.createElementNS(SVG_NS, "line");
  floor.setAttribute("class", "tau-floor-line");
  floor.setAttribute("x1", String(x(0)));
  floor.setAttribute("x2", String(x(Math.max(0, n - 1))));
  floor.setAttribute("y1", String(y(model.tauFloor)));
  floor.setAttribute("y2", String(y(model.tauFloor)));
  floor.setAttribute("stroke-dasharray", "4 3");
  svg.appendChild(floor);

  const line = (values: number[], cls: string) => {
    const path = doc.createElementNS(SVG_NS, "polyline");
    path.setAttribute("class", cls);
    path.setAttribute("fill", "none");
    path.setAttribute("points", values.map((v, i) => `${x(i)},${y(v)}`).join(" "));
    svg.appendChild(path);
  };
  line(model.window, "series-window");
  line(model.tau, "series-tau");

  for (const i of model.floorSteps) {
    const dot = doc.createElementNS(SVG_NS, "circle");
    dot.setAttribute("class", "tau-floor-point");
    dot.setAttribute("cx", String(x(i)));
    dot.setAttribute("cy", String(y(model.tau[i])));
    dot.setAttribute("r", "3");
    svg.appendChild(dot);
  }

  model.labels.forEach((token, i) => {
    const label = doc.createElementNS(SVG_NS, "text");
    label.setAttribute("class", "token-label");
    label.setAttribute("x", String(x(i)));
    label.setAttribute("y", String(HEIGHT - PAD.bottom + 12));
    label.setAttribute(
      "transform",
      `rotate(40 ${x(i)} ${HEIGHT - PAD.bottom + 12})`,
    );
    label.textContent = token;
    svg.appendChild(label);
  });

  const axis = doc.createElementNS(SVG_NS, "text");
  axis.setAttribute("class", "axis-label");
  axis.setAttribute("x", "2");
  axis.setAttribute("y", String(y(model.tauFloor) - 4));
  axis.textContent = `ε=${model.tauFloor}`;
  svg.appendChild(axis);
  return svg;
}
