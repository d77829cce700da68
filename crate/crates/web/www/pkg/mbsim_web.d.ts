/* tslint:disable */
/* eslint-disable */

/**
 * Carrier over interference in dB on a `size x size` grid spanning the
 * coverage box, row-major from the top-left. Points outside every beam's
 * 3 dB footprint are NaN. With `four_color`, only same-colour beams
 * interfere.
 */
export function ci_map(rings: number, size: number, four_color: boolean): Float32Array;

/**
 * One drop on the 7-beam lattice: per-beam throughput CSV for every
 * precoder and four-colour reuse.
 */
export function compare_precoders(seed: bigint, users_per_frame: number, ref_snr_db: number): string;

/**
 * Mean throughput per beam against users per frame, as CSV
 * `precoder,users_per_frame,mean_mbps,ci95_mbps`.
 */
export function rho_sweep(seed: bigint, runs: number, ref_snr_db: number, with_frame_based: boolean): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly ci_map: (a: number, b: number, c: number) => [number, number, number, number];
    readonly compare_precoders: (a: bigint, b: number, c: number) => [number, number, number, number];
    readonly rho_sweep: (a: bigint, b: number, c: number, d: number) => [number, number, number, number];
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
