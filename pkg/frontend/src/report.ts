/** Round-trip verification report emitted next to every exported document. */

export const ROUND_TRIP_TOLERANCE = 1e-6;

export interface ExportReport {
    kind: string;
    parameterCount: number;
    probeCount: number;
    maxDiscrepancy: number;
    tolerance: number;
    pass: boolean;
}

export function makeReport(kind: string, parameterCount: number,
                           discrepancies: number[],
                           tolerance: number = ROUND_TRIP_TOLERANCE): ExportReport {
    const maxDiscrepancy = discrepancies.reduce((a, b) => Math.max(a, Math.abs(b)), 0);
    return {
        kind,
        parameterCount,
        probeCount: discrepancies.length,
        maxDiscrepancy,
        tolerance,
        pass: maxDiscrepancy <= tolerance,
    };
}

export function formatReport(r: ExportReport): string {
    return [
        `kind=${r.kind}`,
        `parameters=${r.parameterCount}`,
        `probes=${r.probeCount}`,
        `max_discrepancy=${r.maxDiscrepancy.toExponential(6)}`,
        `tolerance=${r.tolerance.toExponential(1)}`,
        `status=${r.pass ? "pass" : "FAIL"}`,
    ].join("\n") + "\n";
}
