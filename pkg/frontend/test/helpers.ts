import { execFileSync } from 'node:child_process';
import { existsSync, mkdirSync } from 'node:fs';
import { dirname, join } from 'node:path';
import { fileURLToPath } from 'node:url';

export const CACHE_DIR = join(dirname(fileURLToPath(import.meta.url)), '..', '.cache');

/**
 * Generate (once) a small dataset with the ccbox CLI.  Generation is
 * byte-deterministic in the master seed, so the cache never goes stale.
 */
export function ensureDataset(
  name: string,
  args: string[],
  jobs = 4,
): string {
  const dir = join(CACHE_DIR, name);
  if (!existsSync(join(dir, 'manifest.json'))) {
    mkdirSync(CACHE_DIR, { recursive: true });
    execFileSync(
      'ccbox',
      ['simulate', '--out', dir, '--jobs', String(jobs), ...args],
      { stdio: 'inherit', timeout: 3_000_000 },
    );
  }
  return dir;
}

/** 10 short runs (2 durations x 5), no background: fast fixture. */
export function ensureTinyDataset(): string {
  return ensureDataset('tiny-dataset', [
    '--duration', '0.5', '--duration', '1',
    '--runs', '5', '--seed', '11', '--flux', '1.0', '--no-background',
  ]);
}

export function runCcbox(args: string[]): string {
  return execFileSync('ccbox', args, { encoding: 'utf8', timeout: 600_000 });
}
