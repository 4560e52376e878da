import { writeFileSync } from "node:fs";

import { PortableDocument, serializeDocument } from "../portable.js";
import { ExportReport, formatReport } from "../report.js";

export function parseBox(text: string): [number, number][] {
    return text.split(",").map(part => {
        const [lo, hi] = part.split(":").map(Number);
        if (!Number.isFinite(lo) || !Number.isFinite(hi) || lo >= hi) {
            throw new Error(`bad box component ${part}; expected lo:hi with lo < hi`);
        }
        return [lo, hi] as [number, number];
    });
}

export function usage(script: string): never {
    process.stderr.write(
        `usage: ${script} <checkpoint.json> <out-model.json> <out-report.txt> --box lo:hi[,lo:hi...]\n`);
    process.exit(2);
}

export function cliArgs(script: string): { checkpoint: string; outModel: string;
                                            outReport: string; box: [number, number][] } {
    const args = process.argv.slice(2);
    const boxIdx = args.indexOf("--box");
    if (args.length < 5 || boxIdx < 0 || boxIdx + 1 >= args.length) usage(script);
    const positional = args.filter((_, i) => i !== boxIdx && i !== boxIdx + 1);
    if (positional.length !== 3) usage(script);
    return {
        checkpoint: positional[0],
        outModel: positional[1],
        outReport: positional[2],
        box: parseBox(args[boxIdx + 1]),
    };
}

export function writeOutputs(doc: PortableDocument, report: ExportReport,
                             outModel: string, outReport: string): void {
    writeFileSync(outModel, serializeDocument(doc));
    writeFileSync(outReport, formatReport(report));
    process.stdout.write(formatReport(report));
    if (!report.pass) {
        process.stderr.write("round-trip verification failed\n");
        process.exit(1);
    }
}
