export { exportAnn, loadAnnCheckpoint, saveAnnCheckpoint, UnsupportedLayerError }
    from "./annExport.js";
export { exportGp, GpCheckpoint, GpPosterior } from "./gpExport.js";
export { exportTreeEnsemble, CategoricalSplitError } from "./treeExport.js";
export { fitGbt, predictGbt, GbtModel } from "./gbt.js";
export { engineEvaluate } from "./engine.js";
export { haltonProbes, PortableDocument, serializeDocument } from "./portable.js";
export { ExportReport, formatReport, makeReport, ROUND_TRIP_TOLERANCE } from "./report.js";
