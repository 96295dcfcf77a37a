//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Frames cross the boundary as `SIDE * SIDE` grayscale bytes; views come
//! back as RGBA ready for `ImageData`, several views concatenated.

pub mod ops;

use drivernet::data::{AugmentPolicy, ClassLabel};
use wasm_bindgen::prelude::*;

use ops::SIDE;

fn js(e: drivernet::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub fn side() -> usize {
    SIDE
}

/// `c0 safe driving`, ... in label order.
#[wasm_bindgen]
pub fn class_names() -> Vec<String> {
    ClassLabel::all().map(|l| format!("{} {}", l.name(), l.description())).collect()
}

/// Decodes an uploaded JPEG/PNG/PNM into a grayscale frame.
#[wasm_bindgen]
pub fn load_frame(bytes: &[u8]) -> Result<Vec<u8>, JsError> {
    Ok(ops::load_frame(bytes).map_err(js)?.data().to_vec())
}

#[wasm_bindgen]
pub fn frame_rgba(gray: &[u8]) -> Result<Vec<u8>, JsError> {
    Ok(ops::to_rgba(&ops::frame(gray).map_err(js)?))
}

#[wasm_bindgen]
pub fn augment_rgba(gray: &[u8], seed: u32, rotation_deg: f64, shift_frac: f64, brightness_frac: f64) -> Result<Vec<u8>, JsError> {
    let policy = AugmentPolicy {
        rotation_deg_max: rotation_deg,
        shift_frac_max: shift_frac,
        brightness_frac_max: brightness_frac,
        enabled: true,
    };
    let out = ops::augment_frame(&ops::frame(gray).map_err(js)?, &policy, seed as u64).map_err(js)?;
    Ok(ops::to_rgba(&out))
}

/// Four feature maps, concatenated.
#[wasm_bindgen]
pub fn feature_maps_rgba(gray: &[u8]) -> Result<Vec<u8>, JsError> {
    let maps = ops::feature_maps(&ops::frame(gray).map_err(js)?).map_err(js)?;
    Ok(maps.iter().flat_map(ops::to_rgba).collect())
}

#[wasm_bindgen]
pub struct Corpus(ops::Corpus);

#[wasm_bindgen]
impl Corpus {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, drivers: usize, per_class: usize) -> Result<Corpus, JsError> {
        Ok(Corpus(ops::Corpus::new(seed as u64, drivers, per_class).map_err(js)?))
    }

    /// Grayscale frame of the `n`-th image of `class`.
    pub fn sample(&self, class: usize, n: usize) -> Result<Vec<u8>, JsError> {
        self.0
            .sample(class, n)
            .map(|img| img.data().to_vec())
            .ok_or_else(|| JsError::new(&format!("no images of class c{class}")))
    }

    /// Average of `a`, average of `b`, difference; concatenated RGBA.
    pub fn class_views_rgba(&self, a: usize, b: usize) -> Result<Vec<u8>, JsError> {
        let views = self.0.class_views(a, b).map_err(js)?;
        Ok(views.iter().flat_map(ops::to_rgba).collect())
    }
}
