/** Assemble a Gaussian-process document from training data and hyperparameters,
 * cross-checking the posterior against the engine at probe points. */

import { engineEvaluate } from "./engine.js";
import { GpPayload, PortableDocument, haltonProbes } from "./portable.js";
import { ExportReport, makeReport } from "./report.js";

export interface GpCheckpoint {
    kernel: string; // only "se" is supported
    X: number[][];
    y: number[];
    lengthscales: number[];
    signal_variance: number;
    noise_variance: number;
    prior_mean?: number;
}

function cholesky(matrix: number[][]): number[][] {
    const n = matrix.length;
    const L = Array.from({ length: n }, () => new Array<number>(n).fill(0));
    for (let i = 0; i < n; i++) {
        for (let j = 0; j <= i; j++) {
            let sum = matrix[i][j];
            for (let k = 0; k < j; k++) sum -= L[i][k] * L[j][k];
            if (i === j) {
                if (sum <= 0) throw new Error("kernel matrix is not positive definite");
                L[i][i] = Math.sqrt(sum);
            } else {
                L[i][j] = sum / L[j][j];
            }
        }
    }
    return L;
}

function forwardSolve(L: number[][], b: number[]): number[] {
    const n = b.length;
    const x = new Array<number>(n).fill(0);
    for (let i = 0; i < n; i++) {
        let s = b[i];
        for (let k = 0; k < i; k++) s -= L[i][k] * x[k];
        x[i] = s / L[i][i];
    }
    return x;
}

function backSolve(L: number[][], b: number[]): number[] {
    const n = b.length;
    const x = new Array<number>(n).fill(0);
    for (let i = n - 1; i >= 0; i--) {
        let s = b[i];
        for (let k = i + 1; k < n; k++) s -= L[k][i] * x[k];
        x[i] = s / L[i][i];
    }
    return x;
}

function seKernel(a: number[], b: number[], lengthscales: number[], sf2: number): number {
    let r2 = 0;
    for (let d = 0; d < a.length; d++) {
        const t = lengthscales[d] * (a[d] - b[d]);
        r2 += t * t;
    }
    return sf2 * Math.exp(-0.5 * r2);
}

export class GpPosterior {
    private L: number[][];
    private alpha: number[];

    constructor(private cp: Required<GpCheckpoint>) {
        const n = cp.y.length;
        const K = Array.from({ length: n }, (_, i) =>
            Array.from({ length: n }, (_, j) =>
                seKernel(cp.X[i], cp.X[j], cp.lengthscales, cp.signal_variance)
                + (i === j ? cp.noise_variance : 0)));
        this.L = cholesky(K);
        this.alpha = backSolve(this.L, forwardSolve(this.L, cp.y.map(v => v - cp.prior_mean)));
    }

    predict(x: number[]): [number, number] {
        const k = this.cp.X.map(xi =>
            seKernel(x, xi, this.cp.lengthscales, this.cp.signal_variance));
        const mean = this.cp.prior_mean + k.reduce((s, ki, i) => s + ki * this.alpha[i], 0);
        const v = forwardSolve(this.L, k);
        const variance = this.cp.signal_variance - v.reduce((s, vi) => s + vi * vi, 0);
        return [mean, Math.max(variance, 0)];
    }
}

export interface GpExportResult {
    document: PortableDocument;
    report: ExportReport;
}

export function exportGp(cp: GpCheckpoint, inputBox: [number, number][],
                         name = "exported-gp", probeCount = 64): GpExportResult {
    if (cp.kernel !== "se") {
        throw new Error(`unsupported kernel ${cp.kernel}; only the squared-exponential ` +
                        "kernel can be exported");
    }
    if (cp.X.length !== cp.y.length) {
        throw new Error(`training inputs (${cp.X.length}) and targets (${cp.y.length}) differ`);
    }
    if (cp.X.length === 0) {
        throw new Error("need at least one training point");
    }
    const dim = cp.X[0].length;
    if (cp.lengthscales.length !== dim || cp.lengthscales.some(l => !(l > 0))) {
        throw new Error("lengthscales must be positive, one per input dimension");
    }
    const full: Required<GpCheckpoint> = { prior_mean: 0, ...cp };
    const payload: GpPayload = {
        X: full.X, y: full.y,
        lengthscales: full.lengthscales,
        signal_variance: full.signal_variance,
        noise_variance: full.noise_variance,
        prior_mean: full.prior_mean,
    };
    const doc: PortableDocument = {
        format_version: "1",
        kind: "gp",
        name,
        input_dim: dim,
        output_dim: 1,
        input_box: inputBox,
        payload,
    };
    const posterior = new GpPosterior(full);
    const probes = haltonProbes(probeCount, inputBox);
    const engine = engineEvaluate(doc, probes); // rows: mean variance
    const discrepancies: number[] = [];
    probes.forEach((p, i) => {
        const [mean, variance] = posterior.predict(p);
        discrepancies.push(engine[i][0] - mean, engine[i][1] - variance);
    });
    const params = full.X.length * (dim + 1) + dim + 3;
    return { document: doc, report: makeReport("gp", params, discrepancies) };
}
