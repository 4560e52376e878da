import { readFileSync } from "node:fs";

import { cliArgs, writeOutputs } from "./common.js";
import { GbtModel } from "../gbt.js";
import { exportTreeEnsemble } from "../treeExport.js";

const { checkpoint, outModel, outReport, box } = cliArgs("export-trees");
const model = JSON.parse(readFileSync(checkpoint, "utf-8")) as GbtModel;
const { document, report } = exportTreeEnsemble(model, box);
writeOutputs(document, report, outModel, outReport);
