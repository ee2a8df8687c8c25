/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_mapdemo_free: (a: number, b: number) => void;
export const __wbg_topologydemo_free: (a: number, b: number) => void;
export const mapdemo_anomalous: (a: number, b: number) => number;
export const mapdemo_learn: (a: number, b: number) => [number, number, number];
export const mapdemo_learned: (a: number) => number;
export const mapdemo_len: (a: number) => number;
export const mapdemo_map: (a: number, b: number, c: number) => [number, number, number, number];
export const mapdemo_mask: (a: number, b: number) => [number, number];
export const mapdemo_metrics: (a: number, b: number) => [number, number, number, number];
export const mapdemo_new: (a: number) => [number, number, number];
export const mapdemo_size: (a: number) => [number, number];
export const topologydemo_centers: (a: number) => [number, number];
export const topologydemo_counts: (a: number) => [number, number];
export const topologydemo_edges: (a: number) => [number, number];
export const topologydemo_extent: () => number;
export const topologydemo_new: (a: number, b: number, c: number, d: number) => [number, number, number];
export const topologydemo_score_field: (a: number, b: number) => [number, number, number, number];
export const topologydemo_stream: (a: number, b: number, c: number) => [number, number, number, number];
export const topologydemo_thresholds: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
