/** Minimal gradient-boosted regression trees: the "source framework" for the
 * tree exporter and its tests. Left branch takes strictly smaller values
 * (x < threshold), which the exporter maps onto the document convention. */

export interface GbtSplitNode {
    feature: number;
    threshold: number;
    left: number;
    right: number;
    categories?: number[]; // present only for categorical splits (not exportable)
}

export interface GbtLeafNode {
    value: number;
}

export type GbtNode = GbtSplitNode | GbtLeafNode;

export interface GbtModel {
    base: number;
    learningRate: number;
    trees: GbtNode[][];
}

export function isLeaf(node: GbtNode): node is GbtLeafNode {
    return (node as GbtLeafNode).value !== undefined && !("feature" in node);
}

export interface GbtOptions {
    rounds: number;
    maxDepth: number;
    learningRate: number;
    minSamples?: number;
}

function bestSplit(X: number[][], residual: number[], rows: number[]):
        { feature: number; threshold: number; score: number } | null {
    const dim = X[0].length;
    let best: { feature: number; threshold: number; score: number } | null = null;
    for (let f = 0; f < dim; f++) {
        const order = [...rows].sort((a, b) => X[a][f] - X[b][f]);
        let leftSum = 0;
        let leftCount = 0;
        const total = order.reduce((s, r) => s + residual[r], 0);
        for (let i = 0; i + 1 < order.length; i++) {
            leftSum += residual[order[i]];
            leftCount += 1;
            const a = X[order[i]][f];
            const b = X[order[i + 1]][f];
            if (b - a < 1e-12) continue;
            const rightSum = total - leftSum;
            const rightCount = order.length - leftCount;
            const score = (leftSum * leftSum) / leftCount + (rightSum * rightSum) / rightCount;
            if (best === null || score > best.score + 1e-15) {
                best = { feature: f, threshold: 0.5 * (a + b), score };
            }
        }
    }
    return best;
}

function buildTree(X: number[][], residual: number[], rows: number[], depth: number,
                   minSamples: number, nodes: GbtNode[]): number {
    const mean = rows.reduce((s, r) => s + residual[r], 0) / rows.length;
    if (depth === 0 || rows.length < 2 * minSamples) {
        nodes.push({ value: mean });
        return nodes.length - 1;
    }
    const split = bestSplit(X, residual, rows);
    if (split === null) {
        nodes.push({ value: mean });
        return nodes.length - 1;
    }
    const leftRows = rows.filter(r => X[r][split.feature] < split.threshold);
    const rightRows = rows.filter(r => X[r][split.feature] >= split.threshold);
    if (leftRows.length < minSamples || rightRows.length < minSamples) {
        nodes.push({ value: mean });
        return nodes.length - 1;
    }
    const idx = nodes.length;
    nodes.push({ feature: split.feature, threshold: split.threshold, left: -1, right: -1 });
    const left = buildTree(X, residual, leftRows, depth - 1, minSamples, nodes);
    const right = buildTree(X, residual, rightRows, depth - 1, minSamples, nodes);
    const node = nodes[idx] as GbtSplitNode;
    node.left = left;
    node.right = right;
    return idx;
}

export function predictTree(nodes: GbtNode[], x: number[]): number {
    let node = nodes[0];
    while (!isLeaf(node)) {
        node = x[node.feature] < node.threshold ? nodes[node.left] : nodes[node.right];
    }
    return node.value;
}

export function predictGbt(model: GbtModel, x: number[]): number {
    let out = model.base;
    for (const tree of model.trees) {
        out += model.learningRate * predictTree(tree, x);
    }
    return out;
}

export function fitGbt(X: number[][], y: number[], opts: GbtOptions): GbtModel {
    const minSamples = opts.minSamples ?? 1;
    const base = y.reduce((a, b) => a + b, 0) / y.length;
    const residual = y.map(v => v - base);
    const rows = X.map((_, i) => i);
    const trees: GbtNode[][] = [];
    for (let round = 0; round < opts.rounds; round++) {
        const nodes: GbtNode[] = [];
        buildTree(X, residual, rows, opts.maxDepth, minSamples, nodes);
        trees.push(nodes);
        for (let i = 0; i < X.length; i++) {
            residual[i] -= opts.learningRate * predictTree(nodes, X[i]);
        }
    }
    return { base, learningRate: opts.learningRate, trees };
}
