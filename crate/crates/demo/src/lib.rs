//! Browser demo: JSON in, JSON out. The plain functions carry the logic and
//! are tested natively; the `wasm_*` wrappers only cross the JS boundary.

use curvecast::fit::{fit_trend, FitConfig};
use curvecast::harness::{evaluate_collection, ExperimentConfig, RunSource, RunSpec};
use curvecast::levels::{LevelConfig, Run};
use curvecast::observation::Observation;
use curvecast::pattern::PowerLawParams;
use curvecast::simulate::{generate, SyntheticLearner};
use curvecast::trace::build_full_trace;
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

/// Word grid shared by every demo learner.
fn grid(max_words: u64) -> Vec<u64> {
    (1..=max_words / 5000).map(|i| 5000 * i).collect()
}

#[derive(Debug, Deserialize)]
pub struct PredictRequest {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub sigma: f64,
    pub seed: u64,
    pub tau: f64,
    #[serde(default = "default_max_words")]
    pub max_words: u64,
}

fn default_max_words() -> u64 {
    700_000
}

#[derive(Debug, Serialize)]
pub struct Prediction {
    pub observations: Vec<(u64, f64)>,
    /// `(x, asymptote)` of every level's trend.
    pub backbone: Vec<(u64, f64)>,
    pub wlevel: Option<u64>,
    pub plevel: Option<u64>,
    pub clevel: Option<u64>,
    pub predictor: Option<PowerLawParams>,
    /// The frozen predictor over the whole grid.
    pub predicted: Vec<(u64, f64)>,
}

/// Simulates a learner, traces it and detects its levels.
pub fn predict_curve(request: &str) -> Result<String, String> {
    let req: PredictRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    let learner = SyntheticLearner {
        truth: PowerLawParams::new(req.a, req.b, req.c).map_err(|e| e.to_string())?,
        noise_sigma: req.sigma,
        seed: req.seed,
        x_grid: grid(req.max_words),
    };
    let obs = generate(&learner).map_err(|e| e.to_string())?;
    let trace = build_full_trace(&obs, &FitConfig::default()).map_err(|e| e.to_string())?;
    let config = LevelConfig {
        tau: req.tau,
        window: (5000, req.max_words),
        ..LevelConfig::experiment()
    };
    let run = Run::analyze(trace, config).map_err(|e| e.to_string())?;
    let predictor = run.predictor().map(|t| t.params);
    let out = Prediction {
        observations: obs.iter().map(|o| (o.x, o.accuracy)).collect(),
        backbone: run
            .trace
            .trends
            .iter()
            .zip(&run.trace.backbone)
            .map(|(t, &v)| (run.trace.x(t.level).unwrap_or_default(), v))
            .collect(),
        wlevel: run.word_position(run.wlevel),
        plevel: run.word_position(run.plevel),
        clevel: run.word_position(run.clevel),
        predictor,
        predicted: obs
            .iter()
            .filter_map(|o| Some((o.x, run.estimate(o.x as f64)?)))
            .collect(),
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
pub struct FitResult {
    pub params: PowerLawParams,
    pub asymptote: f64,
    pub rss: f64,
    pub converged: bool,
}

/// Fits a power-law curve to `[[x, accuracy], ...]`.
pub fn fit_points(points: &str) -> Result<String, String> {
    let mut pts: Vec<(u64, f64)> = serde_json::from_str(points).map_err(|e| e.to_string())?;
    pts.sort_by_key(|p| p.0);
    let obs: Vec<Observation> = pts
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| Observation::new(i as u32 + 1, x, y))
        .collect();
    let t = fit_trend(&obs, obs.len(), &FitConfig::default()).map_err(|e| e.to_string())?;
    serde_json::to_string(&FitResult {
        params: t.params,
        asymptote: t.asymptote(),
        rss: t.rss,
        converged: t.converged,
    })
    .map_err(|e| e.to_string())
}

#[derive(Debug, Deserialize)]
pub struct FleetMember {
    pub name: String,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

#[derive(Debug, Deserialize)]
pub struct FleetRequest {
    pub learners: Vec<FleetMember>,
    pub sigma: f64,
    pub seed: u64,
}

/// Simulates a fleet and returns the full evaluation report.
pub fn evaluate_fleet(request: &str) -> Result<String, String> {
    let req: FleetRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    let mut config = ExperimentConfig::new();
    for (i, m) in req.learners.iter().enumerate() {
        let obs = generate(&SyntheticLearner {
            truth: PowerLawParams::new(m.a, m.b, m.c).map_err(|e| format!("{}: {e}", m.name))?,
            noise_sigma: req.sigma,
            seed: req.seed.wrapping_mul(1000).wrapping_add(i as u64),
            x_grid: grid(700_000),
        })
        .map_err(|e| e.to_string())?;
        config.runs.push(RunSpec {
            name: m.name.clone(),
            tau: None,
            source: RunSource::Observations(obs),
        });
    }
    let report = evaluate_collection(&config).map_err(|e| e.to_string())?;
    serde_json::to_string(&report).map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = predictCurve)]
pub fn wasm_predict_curve(request: &str) -> Result<String, JsValue> {
    predict_curve(request).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = fitPoints)]
pub fn wasm_fit_points(points: &str) -> Result<String, JsValue> {
    fit_points(points).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = evaluateFleet)]
pub fn wasm_evaluate_fleet(request: &str) -> Result<String, JsValue> {
    evaluate_fleet(request).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn prediction_finds_levels() {
        let out = predict_curve(r#"{"a":204.570017,"b":0.307277,"c":95,"sigma":0.02,"seed":1,"tau":0.001}"#).unwrap();
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["observations"].as_array().unwrap().len(), 140);
        assert!(v["clevel"].as_u64().unwrap() >= v["plevel"].as_u64().unwrap());
        assert_eq!(v["predicted"].as_array().unwrap().len(), 140);
    }

    #[test]
    fn fitting_points() {
        let pts: Vec<(u64, f64)> = (1..=8)
            .map(|i| {
                let x = 5000 * i;
                (x, 95.0 - 100.0 * (x as f64).powf(-0.4))
            })
            .collect();
        let out = fit_points(&serde_json::to_string(&pts).unwrap()).unwrap();
        let v: Value = serde_json::from_str(&out).unwrap();
        assert!((v["asymptote"].as_f64().unwrap() - 95.0).abs() < 1e-6);
        assert!(fit_points("[[1, 2]]").is_err());
        assert!(fit_points("nonsense").is_err());
    }

    #[test]
    fn fleet_report() {
        let req = r#"{"sigma":0.02,"seed":3,"learners":[
            {"name":"low","a":204.570017,"b":0.307277,"c":94},
            {"name":"high","a":204.570017,"b":0.307277,"c":96}]}"#;
        let v: Value = serde_json::from_str(&evaluate_fleet(req).unwrap()).unwrap();
        assert_eq!(v["rows"].as_array().unwrap().len(), 2);
        assert_eq!(v["rows"][0]["dmr"].as_f64(), Some(100.0));
    }
}
