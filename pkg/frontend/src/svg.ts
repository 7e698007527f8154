/** Minimal SVG plotting scaffolding: scales, paths, axes, legends. */

export interface Margin {
  top: number;
  right: number;
  bottom: number;
  left: number;
}

export const DEFAULT_MARGIN: Margin = { top: 36, right: 16, bottom: 44, left: 64 };

export interface Scale {
  (value: number): number;
  domain: [number, number];
  range: [number, number];
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  const scale = ((value: number) => r0 + ((value - d0) / span) * (r1 - r0)) as Scale;
  scale.domain = domain;
  scale.range = range;
  return scale;
}

export function extent(values: readonly number[], padFraction = 0.05): [number, number] {
  let lo = Math.min(...values);
  let hi = Math.max(...values);
  if (lo === hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  const pad = (hi - lo) * padFraction;
  return [lo - pad, hi + pad];
}

export function ticks(domain: [number, number], count = 5): number[] {
  const [lo, hi] = domain;
  const rawStep = (hi - lo) / Math.max(count, 1);
  const power = Math.pow(10, Math.floor(Math.log10(Math.abs(rawStep) || 1)));
  const candidates = [1, 2, 5, 10].map((m) => m * power);
  const step = candidates.find((c) => c >= rawStep) ?? candidates[3];
  const start = Math.ceil(lo / step) * step;
  const out: number[] = [];
  for (let v = start; v <= hi + 1e-12; v += step) out.push(Number(v.toPrecision(12)));
  return out;
}

export function escapeText(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function fmt(value: number): string {
  if (!Number.isFinite(value)) return "0";
  return Number(value.toPrecision(6)).toString();
}

export function polylinePath(xs: readonly number[], ys: readonly number[]): string {
  return xs.map((x, i) => `${i === 0 ? "M" : "L"}${fmt(x)},${fmt(ys[i])}`).join("");
}

/** Closed band between a lower and an upper series sharing x coordinates. */
export function bandPath(
  xs: readonly number[],
  lower: readonly number[],
  upper: readonly number[]
): string {
  const forward = xs.map((x, i) => `${i === 0 ? "M" : "L"}${fmt(x)},${fmt(upper[i])}`).join("");
  const backward = [...xs]
    .map((_, i) => {
      const k = xs.length - 1 - i;
      return `L${fmt(xs[k])},${fmt(lower[k])}`;
    })
    .join("");
  return `${forward}${backward}Z`;
}

export interface Frame {
  width: number;
  height: number;
  margin: Margin;
  title: string;
  xLabel: string;
  yLabel: string;
}

export function axes(frame: Frame, xScale: Scale, yScale: Scale): string {
  const { width, height, margin } = frame;
  const parts: string[] = [];
  const x0 = margin.left;
  const x1 = width - margin.right;
  const y0 = height - margin.bottom;
  const y1 = margin.top;
  parts.push(`<line x1="${x0}" y1="${y0}" x2="${x1}" y2="${y0}" stroke="#333"/>`);
  parts.push(`<line x1="${x0}" y1="${y0}" x2="${x0}" y2="${y1}" stroke="#333"/>`);
  for (const t of ticks(xScale.domain)) {
    const px = xScale(t);
    if (px < x0 - 1e-6 || px > x1 + 1e-6) continue;
    parts.push(`<line x1="${fmt(px)}" y1="${y0}" x2="${fmt(px)}" y2="${y0 + 4}" stroke="#333"/>`);
    parts.push(
      `<text x="${fmt(px)}" y="${y0 + 18}" font-size="11" text-anchor="middle">${fmt(t)}</text>`
    );
  }
  for (const t of ticks(yScale.domain)) {
    const py = yScale(t);
    if (py > y0 + 1e-6 || py < y1 - 1e-6) continue;
    parts.push(`<line x1="${x0 - 4}" y1="${fmt(py)}" x2="${x0}" y2="${fmt(py)}" stroke="#333"/>`);
    parts.push(
      `<text x="${x0 - 8}" y="${fmt(py + 4)}" font-size="11" text-anchor="end">${fmt(t)}</text>`
    );
    parts.push(
      `<line x1="${x0}" y1="${fmt(py)}" x2="${x1}" y2="${fmt(py)}" stroke="#eee"/>`
    );
  }
  parts.push(
    `<text x="${(x0 + x1) / 2}" y="${height - 8}" font-size="12" text-anchor="middle">` +
      `${escapeText(frame.xLabel)}</text>`
  );
  parts.push(
    `<text x="14" y="${(y0 + y1) / 2}" font-size="12" text-anchor="middle" ` +
      `transform="rotate(-90 14 ${(y0 + y1) / 2})">${escapeText(frame.yLabel)}</text>`
  );
  parts.push(
    `<text x="${(x0 + x1) / 2}" y="20" font-size="14" font-weight="bold" ` +
      `text-anchor="middle">${escapeText(frame.title)}</text>`
  );
  return parts.join("\n");
}

export function legend(
  frame: Frame,
  entries: { label: string; color: string }[]
): string {
  const x = frame.width - frame.margin.right - 150;
  return entries
    .map((entry, i) => {
      const y = frame.margin.top + 10 + 16 * i;
      return (
        `<rect x="${x}" y="${y - 8}" width="10" height="10" fill="${entry.color}"/>` +
        `<text x="${x + 14}" y="${y + 1}" font-size="11">${escapeText(entry.label)}</text>`
      );
    })
    .join("\n");
}

export function document(frame: Frame, body: string): string {
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${frame.width}" ` +
    `height="${frame.height}" viewBox="0 0 ${frame.width} ${frame.height}">\n` +
    `<rect width="${frame.width}" height="${frame.height}" fill="white"/>\n` +
    `${body}\n</svg>\n`
  );
}
