import { RESULT_COLUMNS } from "../src/csv.js";

export interface RowSpec {
  experiment?: string;
  combo: string;
  snr_db: number;
  csi_error_var?: number;
  channel_seed?: number;
  union_bound_ser?: number;
  mc_ser: number;
  mc_stderr?: number;
  outer_iterations?: number;
  wall_time_s?: number;
}

/** Build CSV text in the exact column order the simulation package writes. */
export function makeCsv(rows: RowSpec[]): string {
  const lines = [RESULT_COLUMNS.join(",")];
  for (const r of rows) {
    lines.push(
      [
        r.experiment ?? "synthetic",
        r.combo,
        String(r.snr_db),
        String(r.csi_error_var ?? 0),
        String(r.channel_seed ?? 1),
        String(r.union_bound_ser ?? (r.mc_ser > 0 ? r.mc_ser * 1.5 : 1e-9)),
        String(r.mc_ser),
        String(r.mc_stderr ?? r.mc_ser / 10),
        String(r.outer_iterations ?? 3),
        String(r.wall_time_s ?? 0.01),
      ].join(",")
    );
  }
  return lines.join("\n") + "\n";
}

/** 2 combos x 5 SNR points; one zero estimate at the deepest SNR. */
export function twoComboFiveSnrCsv(): string {
  const rows: RowSpec[] = [];
  const sers: Record<string, number[]> = {
    "vMSER-MMED": [0.12, 0.031, 0.0042, 0.00051, 0],
    "Random-Random": [0.31, 0.19, 0.08, 0.021, 0.006],
  };
  for (const combo of Object.keys(sers)) {
    [0, 4, 8, 12, 16].forEach((snr, i) => {
      const ser = sers[combo][i];
      rows.push({
        combo,
        snr_db: snr,
        mc_ser: ser,
        mc_stderr: ser > 0 ? ser / 12 : 0,
      });
    });
  }
  return makeCsv(rows);
}

export function countMatches(text: string, re: RegExp): number {
  return (text.match(re) ?? []).length;
}
