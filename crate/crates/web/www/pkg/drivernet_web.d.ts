/* tslint:disable */
/* eslint-disable */

export class Corpus {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Average of `a`, average of `b`, difference; concatenated RGBA.
     */
    class_views_rgba(a: number, b: number): Uint8Array;
    constructor(seed: number, drivers: number, per_class: number);
    /**
     * Grayscale frame of the `n`-th image of `class`.
     */
    sample(_class: number, n: number): Uint8Array;
}

export function augment_rgba(gray: Uint8Array, seed: number, rotation_deg: number, shift_frac: number, brightness_frac: number): Uint8Array;

/**
 * `c0 safe driving`, ... in label order.
 */
export function class_names(): string[];

/**
 * Four feature maps, concatenated.
 */
export function feature_maps_rgba(gray: Uint8Array): Uint8Array;

export function frame_rgba(gray: Uint8Array): Uint8Array;

/**
 * Decodes an uploaded JPEG/PNG/PNM into a grayscale frame.
 */
export function load_frame(bytes: Uint8Array): Uint8Array;

export function side(): number;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_corpus_free: (a: number, b: number) => void;
    readonly augment_rgba: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly class_names: () => [number, number];
    readonly corpus_class_views_rgba: (a: number, b: number, c: number) => [number, number, number, number];
    readonly corpus_new: (a: number, b: number, c: number) => [number, number, number];
    readonly corpus_sample: (a: number, b: number, c: number) => [number, number, number, number];
    readonly feature_maps_rgba: (a: number, b: number) => [number, number, number, number];
    readonly frame_rgba: (a: number, b: number) => [number, number, number, number];
    readonly load_frame: (a: number, b: number) => [number, number, number, number];
    readonly side: () => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_drop_slice: (a: number, b: number) => void;
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
