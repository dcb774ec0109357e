/** Gaussian kernel density estimate for violin silhouettes. */

export function kernelDensity(
  samples: number[],
  grid: number[],
  bandwidth?: number,
): number[] {
  const n = samples.length;
  if (n === 0) return grid.map(() => 0);
  const mean = samples.reduce((a, b) => a + b, 0) / n;
  const sd = Math.sqrt(
    samples.reduce((a, b) => a + (b - mean) ** 2, 0) / Math.max(n - 1, 1),
  );
  // Silverman's rule with a floor so degenerate samples still draw
  const h = bandwidth ?? Math.max(1.06 * sd * Math.pow(n, -0.2), 1e-9);
  const norm = 1 / (n * h * Math.sqrt(2 * Math.PI));
  return grid.map((g) => {
    let acc = 0;
    for (const s of samples) {
      const z = (g - s) / h;
      acc += Math.exp(-0.5 * z * z);
    }
    return acc * norm;
  });
}

export function linspace(lo: number, hi: number, count: number): number[] {
  if (count === 1) return [lo];
  const step = (hi - lo) / (count - 1);
  return Array.from({ length: count }, (_, i) => lo + i * step);
}
