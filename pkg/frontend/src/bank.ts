/**
 * Model bank: pick pre-trained weights for observed burst conditions.
 *
 * Entries are keyed by the (duration, flux) grid point they were trained
 * on; selection minimizes Euclidean distance in log space, so a 40 s
 * estimate with a {30, 100} s grid picks 30 s.  Ties break toward the
 * longer duration (more photons, better-conditioned weights).
 */

export interface BankEntry<W> {
  duration_s: number;
  flux: number;
  weights: W;
}

export function modelBankSelect<W>(
  bank: BankEntry<W>[],
  t90Estimate: number,
  fluxEstimate: number,
): BankEntry<W> {
  if (bank.length === 0) throw new Error('empty model bank');
  if (t90Estimate <= 0 || fluxEstimate <= 0) {
    throw new Error('duration and flux estimates must be positive');
  }
  let best: BankEntry<W> | null = null;
  let bestDist = Infinity;
  for (const entry of bank) {
    const dd = Math.log(entry.duration_s) - Math.log(t90Estimate);
    const df = Math.log(entry.flux) - Math.log(fluxEstimate);
    const dist = Math.hypot(dd, df);
    if (
      dist < bestDist - 1e-12 ||
      (Math.abs(dist - bestDist) <= 1e-12 && best !== null &&
        entry.duration_s > best.duration_s)
    ) {
      best = entry;
      bestDist = dist;
    }
  }
  return best!;
}
