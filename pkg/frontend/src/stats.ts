/** Small statistics helpers shared by the figure builders. */

/**
 * Percentile with linear interpolation between order statistics (the same
 * convention numpy uses by default), q in [0, 100].
 */
export function percentile(values: readonly number[], q: number): number {
  if (values.length === 0) throw new Error("percentile of an empty array");
  const sorted = [...values].sort((a, b) => a - b);
  const pos = (q / 100) * (sorted.length - 1);
  const lo = Math.floor(pos);
  const hi = Math.ceil(pos);
  if (lo === hi) return sorted[lo];
  const frac = pos - lo;
  return sorted[lo] * (1 - frac) + sorted[hi] * frac;
}

export function median(values: readonly number[]): number {
  return percentile(values, 50);
}

export interface Quartiles {
  q25: number;
  q50: number;
  q75: number;
}

export function quartiles(values: readonly number[]): Quartiles {
  return { q25: percentile(values, 25), q50: percentile(values, 50), q75: percentile(values, 75) };
}

export function mean(values: readonly number[]): number {
  return values.reduce((a, b) => a + b, 0) / values.length;
}

/** Sample variance (denominator n - 1). */
export function variance(values: readonly number[]): number {
  const m = mean(values);
  return values.reduce((a, b) => a + (b - m) * (b - m), 0) / (values.length - 1);
}
