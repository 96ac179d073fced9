import Papa from "papaparse";

/** Column order of results.csv as the simulation package writes it. */
export const RESULT_COLUMNS = [
  "experiment",
  "combo",
  "snr_db",
  "csi_error_var",
  "channel_seed",
  "union_bound_ser",
  "mc_ser",
  "mc_stderr",
  "outer_iterations",
  "wall_time_s",
] as const;

export type ResultColumn = (typeof RESULT_COLUMNS)[number];

export interface ResultRow {
  experiment: string;
  combo: string;
  snr_db: number;
  csi_error_var: number;
  channel_seed: number;
  union_bound_ser: number;
  mc_ser: number;
  mc_stderr: number;
  outer_iterations: number;
  wall_time_s: number;
}

const NUMERIC_COLUMNS: ResultColumn[] = [
  "snr_db",
  "csi_error_var",
  "channel_seed",
  "union_bound_ser",
  "mc_ser",
  "mc_stderr",
  "outer_iterations",
  "wall_time_s",
];

export class SchemaError extends Error {}

/** Parse results.csv text into typed rows; header must carry every known column. */
export function parseResultsCsv(text: string): ResultRow[] {
  if (text.trim() === "") {
    throw new SchemaError("empty CSV: no header row");
  }
  const parsed = Papa.parse<string[]>(text.trim(), { skipEmptyLines: true });
  if (parsed.errors.length > 0) {
    const e = parsed.errors[0];
    throw new SchemaError(`CSV parse failed at row ${e.row}: ${e.message}`);
  }
  const records = parsed.data;
  const header = records[0];
  const missing = RESULT_COLUMNS.filter((c) => !header.includes(c));
  if (missing.length > 0) {
    throw new SchemaError(`missing columns: ${missing.join(", ")}`);
  }
  const at: Record<string, number> = {};
  for (const c of RESULT_COLUMNS) at[c] = header.indexOf(c);

  return records.slice(1).map((rec, i) => {
    const row: Record<string, string | number> = {
      experiment: rec[at.experiment],
      combo: rec[at.combo],
    };
    for (const c of NUMERIC_COLUMNS) {
      const raw = rec[at[c]];
      const v = Number(raw);
      if (raw === undefined || raw === "" || !Number.isFinite(v)) {
        throw new SchemaError(`row ${i + 1}: column ${c} is not numeric: ${JSON.stringify(raw)}`);
      }
      row[c] = v;
    }
    return row as unknown as ResultRow;
  });
}

/**
 * Monte-Carlo trial count from a run's manifest.json; needed to place the
 * log-axis clamp for rows whose empirical SER is exactly zero.
 */
export function trialsFromManifest(manifestJson: string): number {
  let doc: unknown;
  try {
    doc = JSON.parse(manifestJson);
  } catch (e) {
    throw new SchemaError(`manifest is not valid JSON: ${(e as Error).message}`);
  }
  const trials = (doc as { spec?: { mc_trials?: unknown } })?.spec?.mc_trials;
  if (typeof trials !== "number" || !Number.isInteger(trials) || trials < 1) {
    throw new SchemaError("manifest has no positive integer spec.mc_trials");
  }
  return trials;
}
