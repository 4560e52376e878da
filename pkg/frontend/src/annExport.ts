/** Export a tfjs LayersModel (dense feed-forward) to the portable format. */

import * as tf from "@tensorflow/tfjs";

import { engineEvaluate } from "./engine.js";
import { AnnLayer, Activation, PortableDocument, haltonProbes } from "./portable.js";
import { ExportReport, makeReport } from "./report.js";

const ACTIVATION_MAP: Record<string, Activation> = {
    tanh: "tanh",
    relu: "relu",
    linear: "identity",
};

export class UnsupportedLayerError extends Error {}

function denseLayerToPortable(layer: tf.layers.Layer): AnnLayer {
    if (layer.getClassName() !== "Dense") {
        throw new UnsupportedLayerError(
            `unsupported layer type ${layer.getClassName()} (${layer.name}); ` +
            "only dense feed-forward layers can be exported");
    }
    const config = layer.getConfig() as { activation?: string; useBias?: boolean };
    const activation = ACTIVATION_MAP[config.activation ?? "linear"];
    if (activation === undefined) {
        throw new UnsupportedLayerError(
            `unsupported activation ${config.activation} in layer ${layer.name}`);
    }
    const [kernel, bias] = layer.getWeights();
    // tfjs stores the kernel as (inputs, units); the document wants rows = neurons
    const kArr = kernel.arraySync() as number[][];
    const units = kArr[0].length;
    const weights: number[][] = [];
    for (let j = 0; j < units; j++) {
        weights.push(kArr.map(row => row[j]));
    }
    const biasArr = bias !== undefined
        ? (bias.arraySync() as number[])
        : new Array(units).fill(0);
    return { weights, bias: biasArr, activation };
}

export interface AnnExportResult {
    document: PortableDocument;
    report: ExportReport;
}

export function exportAnn(model: tf.LayersModel, inputBox: [number, number][],
                          name = "exported-ann", probeCount = 256): AnnExportResult {
    const layers = model.layers.filter(l => l.getClassName() !== "InputLayer");
    const portableLayers = layers.map(denseLayerToPortable);
    if (portableLayers.length === 0) {
        throw new UnsupportedLayerError("model has no dense layers");
    }
    const last = portableLayers[portableLayers.length - 1];
    if (last.activation !== "identity") {
        throw new UnsupportedLayerError(
            "the final layer must have linear activation for export");
    }
    const inputDim = portableLayers[0].weights[0].length;
    if (inputBox.length !== inputDim) {
        throw new Error(`input box has ${inputBox.length} rows, model expects ${inputDim}`);
    }
    const doc: PortableDocument = {
        format_version: "1",
        kind: "ann",
        name,
        input_dim: inputDim,
        output_dim: last.bias.length,
        input_box: inputBox,
        payload: portableLayers,
    };

    const probes = haltonProbes(probeCount, inputBox);
    const source = tf.tidy(() => {
        const out = model.predict(tf.tensor2d(probes)) as tf.Tensor;
        return out.arraySync() as number[][];
    });
    const engine = engineEvaluate(doc, probes);
    const discrepancies: number[] = [];
    for (let i = 0; i < probes.length; i++) {
        for (let t = 0; t < source[i].length; t++) {
            discrepancies.push(engine[i][t] - source[i][t]);
        }
    }
    const params = portableLayers.reduce(
        (acc, l) => acc + l.weights.length * l.weights[0].length + l.bias.length, 0);
    return { document: doc, report: makeReport("ann", params, discrepancies) };
}

/** Load a model saved as a single-file tfjs artifacts JSON (see saveArtifacts). */
export async function loadAnnCheckpoint(path: string): Promise<tf.LayersModel> {
    const { readFileSync } = await import("node:fs");
    const raw = JSON.parse(readFileSync(path, "utf-8"));
    const artifacts: tf.io.ModelArtifacts = {
        modelTopology: raw.modelTopology,
        weightSpecs: raw.weightSpecs,
        weightData: Uint8Array.from(Buffer.from(raw.weightDataBase64, "base64")).buffer,
    };
    return tf.loadLayersModel({ load: async () => artifacts });
}

/** Save a tfjs model to a single-file artifacts JSON checkpoint. */
export async function saveAnnCheckpoint(model: tf.LayersModel, path: string): Promise<void> {
    const { writeFileSync } = await import("node:fs");
    await model.save({
        save: async (artifacts: tf.io.ModelArtifacts) => {
            const data = artifacts.weightData as ArrayBuffer;
            writeFileSync(path, JSON.stringify({
                modelTopology: artifacts.modelTopology,
                weightSpecs: artifacts.weightSpecs,
                weightDataBase64: Buffer.from(new Uint8Array(data)).toString("base64"),
            }));
            return { modelArtifactsInfo: { dateSaved: new Date(), modelTopologyType: "JSON" } };
        },
    });
}
