//! Reading scenario, table and calibration files.

use std::fs;
use std::path::{Path, PathBuf};

use geospot_core::catalog::{ComputeProfile, ModelProfile, PriceBook, Scenario};
use geospot_core::netmodel::NetworkMatrix;
use geospot_core::protocol::{CommParams, FitSpec, Measured, Observation, ThroughputPair};
use serde::de::DeserializeOwned;
use serde_json::Value;

use crate::error::LoadError;
use crate::schema::{
    placement_docs, CalibrationDoc, ComputeDoc, ModelDoc, ModelsDoc, NetworkDoc, PricesDoc, RunDoc, ScenarioDoc,
    SearchDoc, SiteDoc,
};
use crate::run::with_vm_count;

/// Environment variable that overrides the bundled data directory.
pub const DATA_DIR_ENV: &str = "GEOSPOT_DATA_DIR";

/// Model table used when a scenario names its model without saying where.
pub const DEFAULT_MODELS: &str = "models.json";

/// Bundled data directory, unless overridden by the environment.
pub fn data_dir() -> PathBuf {
    match std::env::var_os(DATA_DIR_ENV) {
        Some(d) if !d.is_empty() => PathBuf::from(d),
        _ => PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/data")),
    }
}

/// Parses JSON text into `T`, reporting the position and field path of errors.
pub fn parse_json<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T, LoadError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let field = e.path().to_string();
        parse_error(path, field, e.into_inner())
    })?;
    de.end().map_err(|e| parse_error(path, ".".into(), e))?;
    Ok(value)
}

fn parse_error(path: &Path, field: String, e: serde_json::Error) -> LoadError {
    let mut message = e.to_string();
    if let Some(at) = message.rfind(" at line ") {
        message.truncate(at);
    }
    LoadError::Parse { path: path.to_path_buf(), line: e.line(), column: e.column(), field, message }
}

/// Converts an inline sub-document, prefixing error paths with `prefix`.
fn from_inline<T: DeserializeOwned>(value: Value, prefix: &str, path: &Path) -> Result<T, LoadError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let field = if inner == "." { prefix.to_string() } else { format!("{prefix}.{inner}") };
        parse_error(path, field, e.into_inner())
    })
}

/// Resolves and reads input files.
#[derive(Debug, Clone)]
pub struct Loader {
    data_dir: PathBuf,
}

impl Default for Loader {
    fn default() -> Self {
        Loader::new(data_dir())
    }
}

impl Loader {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Loader { data_dir: data_dir.into() }
    }

    pub fn data_dir(&self) -> &Path {
        &self.data_dir
    }

    /// Looks for `name` as given (relative to `base` if set), then in the data directory.
    pub fn resolve(&self, base: Option<&Path>, name: &str) -> Option<PathBuf> {
        let p = Path::new(name);
        let mut candidates = Vec::new();
        if p.is_absolute() {
            candidates.push(p.to_path_buf());
        } else {
            candidates.push(base.map_or_else(|| p.to_path_buf(), |b| b.join(p)));
            candidates.push(self.data_dir.join(p));
        }
        candidates.into_iter().find(|c| c.is_file())
    }

    fn read(&self, what: &'static str, base: Option<&Path>, name: &str) -> Result<(PathBuf, String), LoadError> {
        let path = self.resolve(base, name).ok_or_else(|| LoadError::NotFound { what, path: PathBuf::from(name) })?;
        let text = fs::read_to_string(&path).map_err(|source| LoadError::Io { path: path.clone(), source })?;
        Ok((path, text))
    }

    fn document<T: DeserializeOwned>(&self, what: &'static str, base: Option<&Path>, name: &str) -> Result<T, LoadError> {
        let (path, text) = self.read(what, base, name)?;
        parse_json(&text, &path)
    }

    /// A file reference or an inline object.
    fn reference<T: DeserializeOwned>(
        &self,
        what: &'static str,
        value: Value,
        key: &str,
        base: Option<&Path>,
        path: &Path,
    ) -> Result<T, LoadError> {
        match value {
            Value::String(name) => self.document(what, base, &name),
            v @ Value::Object(_) => from_inline(v, key, path),
            _ => Err(invalid_shape(path, key, "a file name or an object")),
        }
    }

    /// Loads a scenario file and validates it.
    pub fn load_scenario(&self, name: impl AsRef<Path>) -> Result<Scenario, LoadError> {
        let name = name.as_ref();
        let (path, text) = self.read("scenario", None, &name.to_string_lossy())?;
        self.scenario_from_str(&text, &path)
    }

    /// Parses scenario text. References resolve against the directory of `path`.
    pub fn scenario_from_str(&self, text: &str, path: &Path) -> Result<Scenario, LoadError> {
        let doc: ScenarioDoc = parse_json(text, path)?;
        self.scenario_from_doc(doc, path)
    }

    pub fn scenario_from_doc(&self, doc: ScenarioDoc, path: &Path) -> Result<Scenario, LoadError> {
        let base = path.parent();
        let sites = doc.sites.iter().enumerate().map(|(i, s)| s.to_site(i)).collect::<Result<Vec<_>, _>>()?;
        let models = doc.models.as_deref().unwrap_or(DEFAULT_MODELS);
        let model = match doc.model {
            Value::String(name) => self.model(base, models, &name)?,
            v @ Value::Object(_) => from_inline::<ModelDoc>(v, "model", path)?.to_model("model")?,
            _ => return Err(invalid_shape(path, "model", "a model name or an object")),
        };
        let network = self.network(doc.network, base, path)?;
        let prices: PricesDoc = self.reference("price table", doc.prices, "prices", base, path)?;
        let compute: ComputeDoc = self.reference("compute table", doc.compute, "compute", base, path)?;
        let compute = compute.to_profile()?;
        let run = doc.run.to_run()?;
        let search = match &doc.search {
            Some(s) => Some(s.to_spec(&sites, &compute, run.pricing_mode)?),
            None => None,
        };
        let scenario = Scenario {
            id: doc.id,
            sites,
            placement: doc
                .placement
                .iter()
                .map(|p| geospot_core::catalog::Placement { site: p.site.clone(), vm_count: p.vm_count })
                .collect(),
            model,
            run,
            network,
            prices: prices.to_book()?,
            compute,
            search,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Looks up a model by name in a model table.
    pub fn model(&self, base: Option<&Path>, table: &str, name: &str) -> Result<ModelProfile, LoadError> {
        let models: ModelsDoc = self.document("model table", base, table)?;
        let doc = models.models.iter().find(|m| m.name == name).ok_or_else(|| LoadError::Validation {
            key: "model".into(),
            message: format!("unknown model `{name}`"),
        })?;
        doc.to_model(&format!("models.{name}"))
    }

    fn network(&self, value: Value, base: Option<&Path>, path: &Path) -> Result<NetworkMatrix, LoadError> {
        let parts = match value {
            Value::Array(items) => items,
            other => vec![other],
        };
        let mut net = NetworkMatrix::new();
        for (i, part) in parts.into_iter().enumerate() {
            let doc: NetworkDoc = self.reference("network table", part, &format!("network[{i}]"), base, path)?;
            doc.apply(&mut net);
        }
        Ok(net)
    }

    /// Reads one network table.
    pub fn network_table(&self, name: &str) -> Result<NetworkMatrix, LoadError> {
        let mut net = NetworkMatrix::new();
        self.document::<NetworkDoc>("network table", None, name)?.apply(&mut net);
        Ok(net)
    }

    pub fn price_book(&self, name: &str) -> Result<PriceBook, LoadError> {
        self.document::<PricesDoc>("price table", None, name)?.to_book()
    }

    pub fn compute_profile(&self, name: &str) -> Result<ComputeProfile, LoadError> {
        self.document::<ComputeDoc>("compute table", None, name)?.to_profile()
    }

    /// Reads a calibration file and builds the fit inputs.
    pub fn load_calibration(&self, name: impl AsRef<Path>) -> Result<CalibrationInput, LoadError> {
        let (path, text) = self.read("calibration file", None, &name.as_ref().to_string_lossy())?;
        let doc: CalibrationDoc = parse_json(&text, &path)?;
        let base = path.parent();
        let mut spec = FitSpec {
            free_beta: false,
            free_gamma: false,
            free_payload_scale: false,
            fixed: CommParams::from(doc.fit.fixed),
        };
        for name in &doc.fit.free {
            match name.as_str() {
                "beta" => spec.free_beta = true,
                "gamma" => spec.free_gamma = true,
                "payload_scale" => spec.free_payload_scale = true,
                other => {
                    return Err(LoadError::Validation {
                        key: "fit.free".into(),
                        message: format!("unknown parameter `{other}`"),
                    })
                }
            }
        }
        let mut observations = Vec::with_capacity(doc.observations.len());
        for (i, o) in doc.observations.iter().enumerate() {
            let key = |f: &str| format!("observations[{i}].{f}");
            let spath = self
                .resolve(base, &o.scenario)
                .ok_or_else(|| LoadError::NotFound { what: "scenario", path: PathBuf::from(&o.scenario) })?;
            let mut scenario = self.load_scenario(&spath)?;
            if let Some(m) = &o.model {
                scenario.model = self.model(spath.parent(), DEFAULT_MODELS, m)?;
            }
            if let Some(n) = o.vm_count {
                scenario = with_vm_count(&scenario, n)?;
            }
            scenario.validate()?;
            let measured = match (o.measured_t_comm_s, o.measured_sps, o.measured_granularity) {
                (Some(t), None, None) => Measured::CommSeconds(t),
                (None, Some(sps), Some(g)) => {
                    if !(sps > 0.0) || !(g >= 0.0) {
                        return Err(LoadError::Validation { key: key("measured_sps"), message: "must be positive".into() });
                    }
                    Measured::CommSeconds(scenario.run.tbs as f64 / sps / (1.0 + g))
                }
                (None, Some(sps), None) => Measured::Sps(sps),
                _ => {
                    return Err(LoadError::Validation {
                        key: key("measured_t_comm_s"),
                        message: "give either measured_t_comm_s or measured_sps (optionally with measured_granularity)"
                            .into(),
                    })
                }
            };
            observations.push(Observation { scenario, measured });
        }
        let pairs = doc
            .throughput_pairs
            .iter()
            .map(|p| ThroughputPair { model: p.model.clone(), baseline_sps: p.baseline_sps, local_sps: p.local_sps })
            .collect();
        Ok(CalibrationInput { doc, observations, pairs, spec })
    }
}

fn invalid_shape(path: &Path, key: &str, expected: &str) -> LoadError {
    LoadError::Parse {
        path: path.to_path_buf(),
        line: 0,
        column: 0,
        field: key.into(),
        message: format!("expected {expected}"),
    }
}

/// Everything a calibration run needs.
#[derive(Debug, Clone)]
pub struct CalibrationInput {
    pub doc: CalibrationDoc,
    pub observations: Vec<Observation>,
    pub pairs: Vec<ThroughputPair>,
    pub spec: FitSpec,
}

/// Self-contained document of a scenario with every table inline.
pub fn scenario_to_doc(s: &Scenario) -> ScenarioDoc {
    let to_value = |v: Result<Value, serde_json::Error>| v.expect("plain data serializes");
    ScenarioDoc {
        id: s.id.clone(),
        description: None,
        sites: s.sites.iter().map(SiteDoc::from_site).collect(),
        placement: placement_docs(&s.placement),
        model: to_value(serde_json::to_value(ModelDoc::from_model(&s.model))),
        models: None,
        run: RunDoc::from_run(&s.run),
        network: to_value(serde_json::to_value(NetworkDoc::from_matrix(&s.network))),
        prices: to_value(serde_json::to_value(PricesDoc::from_book(&s.prices))),
        compute: to_value(serde_json::to_value(ComputeDoc::from_profile(&s.compute))),
        search: s.search.as_ref().map(SearchDoc::from_spec),
    }
}

/// Pretty JSON of [`scenario_to_doc`].
pub fn scenario_to_json(s: &Scenario) -> String {
    let mut out = serde_json::to_string_pretty(&scenario_to_doc(s)).expect("plain data serializes");
    out.push('\n');
    out
}
