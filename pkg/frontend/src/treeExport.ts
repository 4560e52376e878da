/** Export a boosted ensemble to the portable mean-aggregated tree format. */

import { GbtModel, GbtNode, GbtSplitNode, isLeaf, predictGbt } from "./gbt.js";
import { engineEvaluate } from "./engine.js";
import { PortableDocument, TreeNode, haltonProbes } from "./portable.js";
import { ExportReport, makeReport } from "./report.js";

export class CategoricalSplitError extends Error {}

/**
 * Convert one source tree. The source sends x < threshold left; the document
 * sends x <= threshold left. Thresholds are midpoints between distinct data
 * values, so the conventions agree except exactly at a threshold.
 *
 * Additive boosted outputs fold into mean aggregation by scaling each leaf by
 * the tree count and folding the base plus learning rate in.
 */
function convertTree(nodes: GbtNode[], scale: number, offset: number): TreeNode[] {
    return nodes.map(node => {
        if (isLeaf(node)) {
            return { leaf: { value: scale * node.value + offset } };
        }
        const split = node as GbtSplitNode;
        if (split.categories !== undefined) {
            throw new CategoricalSplitError(
                `categorical split on feature ${split.feature} cannot be exported; ` +
                "only continuous thresholds are supported");
        }
        return {
            split: {
                feature: split.feature,
                threshold: split.threshold,
                left: split.left,
                right: split.right,
            },
        };
    });
}

export interface TreeExportResult {
    document: PortableDocument;
    report: ExportReport;
}

export function exportTreeEnsemble(model: GbtModel, inputBox: [number, number][],
                                   name = "exported-trees",
                                   probeCount = 256): TreeExportResult {
    const T = model.trees.length;
    if (T === 0) {
        throw new Error("ensemble has no trees");
    }
    const scale = T * model.learningRate;
    const offset = model.base; // every converted leaf carries base; the mean restores it
    const trees = model.trees.map(tree => convertTree(tree, scale, offset));
    const dim = inputBox.length;
    const doc: PortableDocument = {
        format_version: "1",
        kind: "tree_ensemble",
        name,
        input_dim: dim,
        output_dim: 1,
        input_box: inputBox,
        payload: trees,
    };
    // the two conventions (source: strict less-than, document: less-or-equal)
    // disagree exactly on thresholds, so nudge any probe off them
    const thresholds: Map<number, number[]> = new Map();
    for (const tree of trees) {
        for (const node of tree) {
            if ("split" in node) {
                const list = thresholds.get(node.split.feature) ?? [];
                list.push(node.split.threshold);
                thresholds.set(node.split.feature, list);
            }
        }
    }
    const probes = haltonProbes(probeCount, inputBox).map(p =>
        p.map((v, d) => {
            const hits = thresholds.get(d) ?? [];
            const width = inputBox[d][1] - inputBox[d][0];
            return hits.some(c => Math.abs(v - c) < 1e-12)
                ? Math.min(v + 1e-9 * width, inputBox[d][1]) : v;
        }));
    const engine = engineEvaluate(doc, probes);
    const discrepancies = probes.map((p, i) => engine[i][0] - predictGbt(model, p));
    const params = trees.reduce((acc, t) => acc + t.length, 0);
    return { document: doc, report: makeReport("tree_ensemble", params, discrepancies) };
}
