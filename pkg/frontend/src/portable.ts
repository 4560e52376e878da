/** Portable model document format shared with the optimization engine. */

export type Activation = "tanh" | "relu" | "identity";

export interface AnnLayer {
    weights: number[][]; // rows = neurons of the next layer
    bias: number[];
    activation: Activation;
}

export interface SplitNode {
    split: { feature: number; threshold: number; left: number; right: number };
}

export interface LeafNode {
    leaf: { value: number };
}

export type TreeNode = SplitNode | LeafNode;

export interface GpPayload {
    X: number[][];
    y: number[];
    lengthscales: number[];
    signal_variance: number;
    noise_variance: number;
    prior_mean: number;
}

export interface PortableDocument {
    format_version: "1";
    kind: "ann" | "gp" | "tree_ensemble" | "crs";
    name?: string;
    input_dim: number;
    output_dim: number;
    input_box: [number, number][];
    payload: AnnLayer[] | GpPayload | TreeNode[][] | unknown;
}

export function serializeDocument(doc: PortableDocument): string {
    return JSON.stringify(doc, null, 1) + "\n";
}

/** Deterministic Halton probe points scaled into the input box. */
export function haltonProbes(count: number, box: [number, number][]): number[][] {
    const primes = [2, 3, 5, 7, 11, 13, 17, 19];
    if (box.length > primes.length) {
        throw new Error(`probe generator supports up to ${primes.length} dimensions`);
    }
    const vdc = (index: number, base: number): number => {
        let v = 0;
        let denom = 1;
        let i = index;
        while (i > 0) {
            denom *= base;
            v += (i % base) / denom;
            i = Math.floor(i / base);
        }
        return v;
    };
    const pts: number[][] = [];
    for (let i = 0; i < count; i++) {
        pts.push(box.map(([lo, hi], d) => lo + vdc(i + 1, primes[d]) * (hi - lo)));
    }
    return pts;
}
