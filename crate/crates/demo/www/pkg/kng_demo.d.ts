/* tslint:disable */
/* eslint-disable */

/**
 * Anomaly maps on a synthetic image stream.
 */
export class MapDemo {
    free(): void;
    [Symbol.dispose](): void;
    anomalous(i: number): boolean;
    learn(batch: number): number;
    learned(): number;
    len(): number;
    map(i: number, sigma: number): Float64Array;
    mask(i: number): Uint8Array;
    /**
     * `{"image_rocauc", "pixel_rocauc", "pro"}` over the whole stream.
     */
    metrics(sigma: number): string;
    constructor(seed: number);
    size(): Uint32Array;
}

/**
 * 2-D topology learning.
 */
export class TopologyDemo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Flattened `[x, y]` centers.
     */
    centers(): Float64Array;
    counts(): Float64Array;
    /**
     * Flattened `[a, b]` neuron index pairs.
     */
    edges(): Uint32Array;
    static extent(): number;
    constructor(seed: number, k: number, epochs: number, n_train: number);
    score_field(res: number): Float64Array;
    /**
     * Streams one batch; returns flattened `[x, y, outlier, accepted]`.
     */
    stream(n: number, outlier_ratio: number): Float64Array;
    thresholds(): Float64Array;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_mapdemo_free: (a: number, b: number) => void;
    readonly __wbg_topologydemo_free: (a: number, b: number) => void;
    readonly mapdemo_anomalous: (a: number, b: number) => number;
    readonly mapdemo_learn: (a: number, b: number) => [number, number, number];
    readonly mapdemo_learned: (a: number) => number;
    readonly mapdemo_len: (a: number) => number;
    readonly mapdemo_map: (a: number, b: number, c: number) => [number, number, number, number];
    readonly mapdemo_mask: (a: number, b: number) => [number, number];
    readonly mapdemo_metrics: (a: number, b: number) => [number, number, number, number];
    readonly mapdemo_new: (a: number) => [number, number, number];
    readonly mapdemo_size: (a: number) => [number, number];
    readonly topologydemo_centers: (a: number) => [number, number];
    readonly topologydemo_counts: (a: number) => [number, number];
    readonly topologydemo_edges: (a: number) => [number, number];
    readonly topologydemo_extent: () => number;
    readonly topologydemo_new: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly topologydemo_score_field: (a: number, b: number) => [number, number, number, number];
    readonly topologydemo_stream: (a: number, b: number, c: number) => [number, number, number, number];
    readonly topologydemo_thresholds: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
