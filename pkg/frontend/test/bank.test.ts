import { describe, expect, it } from 'vitest';

import { modelBankSelect } from '../src/bank.js';

const entry = (duration_s: number, flux: number) => ({
  duration_s,
  flux,
  weights: `${duration_s}s@${flux}`,
});

describe('model bank selection', () => {
  it('exact grid match returns that entry', () => {
    const bank = [entry(1, 1), entry(30, 1), entry(100, 1)];
    expect(modelBankSelect(bank, 30, 1).weights).toBe('30s@1');
  });

  it('40 s with a {30, 100} grid picks 30 s by log distance', () => {
    // |ln 40 - ln 30| = 0.288 < |ln 40 - ln 100| = 0.916
    const bank = [entry(30, 1), entry(100, 1)];
    expect(modelBankSelect(bank, 40, 1).duration_s).toBe(30);
  });

  it('single-entry bank answers any query', () => {
    const bank = [entry(3, 0.5)];
    expect(modelBankSelect(bank, 1000, 10)).toBe(bank[0]);
    expect(modelBankSelect(bank, 0.01, 0.01)).toBe(bank[0]);
  });

  it('flux enters the distance too', () => {
    const bank = [entry(30, 0.1), entry(30, 10)];
    expect(modelBankSelect(bank, 30, 5).flux).toBe(10);
  });

  it('ties break toward the longer duration', () => {
    // 30 s and 120 s are log-equidistant from 60 s
    const bank = [entry(30, 1), entry(120, 1)];
    expect(modelBankSelect(bank, 60, 1).duration_s).toBe(120);
    expect(modelBankSelect([...bank].reverse(), 60, 1).duration_s).toBe(120);
  });

  it('rejects empty banks and bad estimates', () => {
    expect(() => modelBankSelect([], 30, 1)).toThrow(/empty/);
    expect(() => modelBankSelect([entry(30, 1)], -5, 1)).toThrow(/positive/);
    expect(() => modelBankSelect([entry(30, 1)], 30, 0)).toThrow(/positive/);
  });
});
