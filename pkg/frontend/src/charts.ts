// SVG chart builders used by the report view. These are pure string
// functions so they can be unit-tested without a DOM. The scaling in
// here is the only arithmetic the front end performs on report data;
// every displayed metric value is passed through verbatim elsewhere.

export type EcdfSeries = [number, number][]; // [value, cumulative share]

export interface FrequencySeries {
  labels: (string | null)[];
  real: number[];
  synthetic: number[];
}

function esc(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function fmtTick(v: number): string {
  if (!isFinite(v)) return "";
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1000 || a < 0.01) return v.toExponential(1);
  return String(Math.round(v * 100) / 100);
}

// Empirical CDFs drawn as step functions: horizontal to the next x,
// then vertical. A spike of repeated values (e.g. exact zeros in a
// mixed column) therefore shows up as a vertical jump carrying its
// whole mass at one x position.
export function ecdfSvg(
  real: EcdfSeries,
  synthetic: EcdfSeries,
  width = 420,
  height = 220,
): string {
  const padL = 46;
  const padB = 24;
  const padT = 8;
  const padR = 10;
  const xs = [...real, ...synthetic].map((p) => p[0]);
  if (xs.length === 0) {
    return `<svg class="chart ecdf" viewBox="0 0 ${width} ${height}"></svg>`;
  }
  let xmin = Math.min(...xs);
  let xmax = Math.max(...xs);
  if (xmax === xmin) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  const plotW = width - padL - padR;
  const plotH = height - padT - padB;
  const sx = (x: number) => padL + ((x - xmin) / (xmax - xmin)) * plotW;
  const sy = (y: number) => padT + (1 - y) * plotH;

  const path = (pts: EcdfSeries): string => {
    if (pts.length === 0) return "";
    const parts = [`M ${sx(pts[0][0])} ${sy(0)}`, `L ${sx(pts[0][0])} ${sy(pts[0][1])}`];
    for (let i = 1; i < pts.length; i++) {
      parts.push(`L ${sx(pts[i][0])} ${sy(pts[i - 1][1])}`);
      parts.push(`L ${sx(pts[i][0])} ${sy(pts[i][1])}`);
    }
    return parts.join(" ");
  };

  const axisY = sy(0);
  return `<svg class="chart ecdf" viewBox="0 0 ${width} ${height}" role="img">
  <line class="axis" x1="${padL}" y1="${axisY}" x2="${width - padR}" y2="${axisY}"/>
  <line class="axis" x1="${padL}" y1="${padT}" x2="${padL}" y2="${axisY}"/>
  <text class="tick" x="${padL}" y="${height - 6}">${fmtTick(xmin)}</text>
  <text class="tick" x="${width - padR}" y="${height - 6}" text-anchor="end">${fmtTick(xmax)}</text>
  <text class="tick" x="${padL - 4}" y="${sy(1) + 4}" text-anchor="end">1</text>
  <text class="tick" x="${padL - 4}" y="${axisY}" text-anchor="end">0</text>
  <path class="series real" fill="none" d="${path(real)}"/>
  <path class="series synthetic" fill="none" d="${path(synthetic)}"/>
</svg>`;
}

// Grouped bars, one real/synthetic pair per category.
export function frequencyBarsSvg(
  freq: FrequencySeries,
  width = 420,
  height = 220,
): string {
  const padL = 34;
  const padB = 38;
  const padT = 8;
  const padR = 8;
  const n = freq.labels.length;
  if (n === 0) {
    return `<svg class="chart bars" viewBox="0 0 ${width} ${height}"></svg>`;
  }
  const ymax = Math.max(...freq.real, ...freq.synthetic, 1e-9);
  const plotW = width - padL - padR;
  const plotH = height - padT - padB;
  const group = plotW / n;
  const bar = Math.min(28, group * 0.36);
  const sy = (v: number) => padT + (1 - v / ymax) * plotH;

  const parts: string[] = [];
  for (let i = 0; i < n; i++) {
    const cx = padL + group * (i + 0.5);
    const label = freq.labels[i] === null ? "(missing)" : String(freq.labels[i]);
    const r = freq.real[i] ?? 0;
    const s = freq.synthetic[i] ?? 0;
    parts.push(
      `<rect class="series real" x="${cx - bar - 1}" y="${sy(r)}" width="${bar}" height="${padT + plotH - sy(r)}"><title>${esc(label)} real ${r}</title></rect>`,
    );
    parts.push(
      `<rect class="series synthetic" x="${cx + 1}" y="${sy(s)}" width="${bar}" height="${padT + plotH - sy(s)}"><title>${esc(label)} synthetic ${s}</title></rect>`,
    );
    parts.push(
      `<text class="tick" x="${cx}" y="${height - 20}" text-anchor="middle">${esc(label.length > 9 ? label.slice(0, 8) + "…" : label)}</text>`,
    );
  }
  const axisY = padT + plotH;
  return `<svg class="chart bars" viewBox="0 0 ${width} ${height}" role="img">
  <line class="axis" x1="${padL}" y1="${axisY}" x2="${width - padR}" y2="${axisY}"/>
  <text class="tick" x="${padL - 4}" y="${padT + 10}" text-anchor="end">${fmtTick(ymax)}</text>
  <text class="tick" x="${padL - 4}" y="${axisY}" text-anchor="end">0</text>
  ${parts.join("\n  ")}
</svg>`;
}

// Loss curves for the training monitor: one polyline per history key,
// scaled to the combined range.
export function lossCurvesSvg(
  history: Record<string, number[]> | null | undefined,
  width = 420,
  height = 200,
): string {
  const h = history ?? {};
  const keys = Object.keys(h).filter((k) => h[k].length > 0);
  if (keys.length === 0) {
    return `<svg class="chart losses" viewBox="0 0 ${width} ${height}"></svg>`;
  }
  const all = keys.flatMap((k) => h[k]);
  let lo = Math.min(...all);
  let hi = Math.max(...all);
  if (hi === lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  const padL = 40;
  const padB = 18;
  const padT = 8;
  const padR = 8;
  const plotW = width - padL - padR;
  const plotH = height - padT - padB;
  const maxLen = Math.max(...keys.map((k) => h[k].length));
  const sx = (i: number) => padL + (maxLen === 1 ? 0 : (i / (maxLen - 1)) * plotW);
  const sy = (v: number) => padT + (1 - (v - lo) / (hi - lo)) * plotH;

  const lines = keys.map((k, ki) => {
    const pts = h[k].map((v, i) => `${sx(i)},${sy(v)}`).join(" ");
    return `<polyline class="loss loss-${ki}" data-key="${esc(k)}" fill="none" points="${pts}"/>`;
  });
  const legend = keys.map(
    (k, ki) =>
      `<text class="legend loss-${ki}" x="${padL + 6}" y="${padT + 12 + ki * 13}">${esc(k)}</text>`,
  );
  return `<svg class="chart losses" viewBox="0 0 ${width} ${height}" role="img">
  <line class="axis" x1="${padL}" y1="${padT + plotH}" x2="${width - padR}" y2="${padT + plotH}"/>
  <text class="tick" x="${padL - 4}" y="${padT + 10}" text-anchor="end">${fmtTick(hi)}</text>
  <text class="tick" x="${padL - 4}" y="${padT + plotH}" text-anchor="end">${fmtTick(lo)}</text>
  ${lines.join("\n  ")}
  ${legend.join("\n  ")}
</svg>`;
}
