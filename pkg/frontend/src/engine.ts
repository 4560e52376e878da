/** Bridge to the optimization engine through its CLI and document format. */

import { execFileSync } from "node:child_process";
import { mkdtempSync, rmSync, writeFileSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { PortableDocument, serializeDocument } from "./portable.js";

const PYTHON = process.env.EMBEDOPT_PYTHON ?? "python3";

/** Evaluate a portable document on probe points via `embedopt evaluate`. */
export function engineEvaluate(doc: PortableDocument, probes: number[][]): number[][] {
    const dir = mkdtempSync(join(tmpdir(), "embedopt-export-"));
    try {
        const modelPath = join(dir, "model.json");
        const pointsPath = join(dir, "points.txt");
        const outPath = join(dir, "values.txt");
        writeFileSync(modelPath, serializeDocument(doc));
        writeFileSync(pointsPath, probes.map(p => p.join(" ")).join("\n") + "\n");
        execFileSync(PYTHON, ["-m", "embedopt.cli", "evaluate",
                              "--model", modelPath, "--points", pointsPath,
                              "--out", outPath],
                     { stdio: ["ignore", "pipe", "pipe"] });
        const rows = readFileSync(outPath, "utf-8").trim().split("\n");
        return rows.map(row => row.split(/\s+/).map(Number));
    } finally {
        rmSync(dir, { recursive: true, force: true });
    }
}
