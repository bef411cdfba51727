/* tslint:disable */
/* eslint-disable */

/**
 * Exact two-qubit tomography of the CZ on `(q, q+1)`; returns χ and F_χ.
 */
export function cz_tomography(q: number, backend: string): string;

/**
 * The device table as JSON.
 */
export function device(): string;

/**
 * GHZ state on `n` qubits from `offset` plus its parity scan; returns the
 * curve, the fit and the fidelity as JSON.
 */
export function parity_scan(n: number, offset: number, backend: string, shots: number, points: number, seed: number): string;

/**
 * Runs an assembly program; returns the result document as JSON.
 */
export function run_program(source: string, shots: number, backend: string, correct: boolean, seed: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly cz_tomography: (a: number, b: number, c: number) => [number, number, number, number];
    readonly device: () => [number, number];
    readonly parity_scan: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly run_program: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
