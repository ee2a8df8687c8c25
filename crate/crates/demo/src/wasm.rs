use wasm_bindgen::prelude::*;

fn js(e: kng::KngError) -> JsError {
    JsError::new(&e.to_string())
}

/// 2-D topology learning.
#[wasm_bindgen]
pub struct TopologyDemo {
    inner: crate::Topology,
}

#[wasm_bindgen]
impl TopologyDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, k: u32, epochs: u32, n_train: u32) -> Result<TopologyDemo, JsError> {
        let inner = crate::Topology::new(seed as u64, k as usize, epochs as usize, n_train as usize).map_err(js)?;
        Ok(Self { inner })
    }

    pub fn extent() -> f64 {
        crate::EXTENT
    }

    /// Flattened `[x, y]` centers.
    pub fn centers(&self) -> Vec<f64> {
        self.inner.model.neurons.iter().flat_map(|n| n.center.iter().copied()).collect()
    }

    pub fn thresholds(&self) -> Vec<f64> {
        self.inner.model.neurons.iter().map(|n| n.threshold).collect()
    }

    pub fn counts(&self) -> Vec<f64> {
        self.inner.model.neurons.iter().map(|n| n.count as f64).collect()
    }

    /// Flattened `[a, b]` neuron index pairs.
    pub fn edges(&self) -> Vec<u32> {
        self.inner.model.graph.edges().flat_map(|(a, b, _)| [a as u32, b as u32]).collect()
    }

    /// Streams one batch; returns flattened `[x, y, outlier, accepted]`.
    pub fn stream(&mut self, n: u32, outlier_ratio: f64) -> Result<Vec<f64>, JsError> {
        let pts = self.inner.stream(n as usize, outlier_ratio).map_err(js)?;
        Ok(pts
            .iter()
            .flat_map(|p| [p.xy[0], p.xy[1], p.outlier as u8 as f64, p.accepted as u8 as f64])
            .collect())
    }

    pub fn score_field(&self, res: u32) -> Result<Vec<f64>, JsError> {
        self.inner.score_field(res as usize).map_err(js)
    }
}

/// Anomaly maps on a synthetic image stream.
#[wasm_bindgen]
pub struct MapDemo {
    inner: crate::Maps,
}

#[wasm_bindgen]
impl MapDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32) -> Result<MapDemo, JsError> {
        Ok(Self { inner: crate::Maps::new(seed as u64).map_err(js)? })
    }

    pub fn len(&self) -> u32 {
        self.inner.len() as u32
    }

    pub fn size(&self) -> Vec<u32> {
        let (h, w) = self.inner.spec.mask_size();
        vec![h as u32, w as u32]
    }

    pub fn anomalous(&self, i: u32) -> bool {
        self.inner.anomalous(i as usize)
    }

    pub fn mask(&self, i: u32) -> Vec<u8> {
        self.inner.mask(i as usize).data().to_vec()
    }

    pub fn map(&self, i: u32, sigma: f64) -> Result<Vec<f64>, JsError> {
        Ok(self.inner.map(i as usize, sigma).map_err(js)?.scores)
    }

    /// `{"image_rocauc", "pixel_rocauc", "pro"}` over the whole stream.
    pub fn metrics(&self, sigma: f64) -> Result<String, JsError> {
        let m = self.inner.metrics(sigma).map_err(js)?;
        Ok(serde_json::json!({
            "image_rocauc": m.image_rocauc,
            "pixel_rocauc": m.pixel_rocauc,
            "pro": m.pro,
        })
        .to_string())
    }

    pub fn learn(&mut self, batch: u32) -> Result<u32, JsError> {
        Ok(self.inner.learn(batch as usize).map_err(js)? as u32)
    }

    pub fn learned(&self) -> u32 {
        self.inner.learned() as u32
    }
}
