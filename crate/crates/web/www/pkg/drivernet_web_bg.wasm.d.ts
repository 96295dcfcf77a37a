/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_corpus_free: (a: number, b: number) => void;
export const augment_rgba: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const class_names: () => [number, number];
export const corpus_class_views_rgba: (a: number, b: number, c: number) => [number, number, number, number];
export const corpus_new: (a: number, b: number, c: number) => [number, number, number];
export const corpus_sample: (a: number, b: number, c: number) => [number, number, number, number];
export const feature_maps_rgba: (a: number, b: number) => [number, number, number, number];
export const frame_rgba: (a: number, b: number) => [number, number, number, number];
export const load_frame: (a: number, b: number) => [number, number, number, number];
export const side: () => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_drop_slice: (a: number, b: number) => void;
export const __wbindgen_start: () => void;
