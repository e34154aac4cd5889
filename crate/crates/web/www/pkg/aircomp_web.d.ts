/* tslint:disable */
/* eslint-disable */

/**
 * Closed-form error of every design on one seeded channel draw.
 */
export function compareDesigns(params: any): any;

/**
 * Monte Carlo sweep of all designs over `variable` (`m`, `r`, `K` or `snr_db`).
 */
export function sweep(params: any, variable: string, values: Float64Array, channels: number, sources: number): any;

/**
 * Water-filling power `|phi_j|^2` for explicit modes.
 */
export function waterfill(deltas: Float64Array, lambdas: Float64Array, leverages: Float64Array, budget: number, limit: number): any;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly compareDesigns: (a: any) => [number, number, number];
    readonly sweep: (a: any, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
    readonly waterfill: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number];
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
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
