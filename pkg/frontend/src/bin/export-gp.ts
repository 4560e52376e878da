import { readFileSync } from "node:fs";

import { cliArgs, writeOutputs } from "./common.js";
import { GpCheckpoint, exportGp } from "../gpExport.js";

const { checkpoint, outModel, outReport, box } = cliArgs("export-gp");
const cp = JSON.parse(readFileSync(checkpoint, "utf-8")) as GpCheckpoint;
const { document, report } = exportGp(cp, box);
writeOutputs(document, report, outModel, outReport);
