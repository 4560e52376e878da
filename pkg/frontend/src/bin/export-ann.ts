import { cliArgs, writeOutputs } from "./common.js";
import { exportAnn, loadAnnCheckpoint } from "../annExport.js";

const { checkpoint, outModel, outReport, box } = cliArgs("export-ann");
const model = await loadAnnCheckpoint(checkpoint);
const { document, report } = exportAnn(model, box);
writeOutputs(document, report, outModel, outReport);
