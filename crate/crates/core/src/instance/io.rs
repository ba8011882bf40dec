use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{read_edge_list, CostMode, Demand, Instance, Location, Vehicle};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleSpec {
    pub origin: Location,
    pub destination: Location,
}

/// On-disk instance description. Costs are not stored; they are rebuilt
/// from the coordinates or from the referenced edge list on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub n: usize,
    pub k: usize,
    pub q: u32,
    pub vehicles: Vec<VehicleSpec>,
    pub demands: Vec<Demand>,
    #[serde(default)]
    pub cost_mode: CostMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph_file: Option<PathBuf>,
}

impl InstanceFile {
    pub fn from_instance(inst: &Instance) -> Self {
        Self {
            n: inst.n(),
            k: inst.k(),
            q: inst.q(),
            vehicles: inst
                .vehicles()
                .iter()
                .map(|v| VehicleSpec {
                    origin: v.origin.clone(),
                    destination: v.destination.clone(),
                })
                .collect(),
            demands: inst.demands().to_vec(),
            cost_mode: inst.cost_mode(),
            graph_file: inst.graph_file().map(Path::to_path_buf),
        }
    }

    /// Builds the instance. A relative `graph_file` is resolved against
    /// `base_dir`.
    pub fn into_instance(self, base_dir: &Path) -> Result<Instance> {
        if self.n != self.demands.len() {
            return Err(Error::invalid(format!(
                "n = {} but {} demands listed",
                self.n,
                self.demands.len()
            )));
        }
        if self.k != self.vehicles.len() {
            return Err(Error::invalid(format!(
                "k = {} but {} vehicles listed",
                self.k,
                self.vehicles.len()
            )));
        }
        let vehicles: Vec<Vehicle> = self
            .vehicles
            .into_iter()
            .map(|v| Vehicle {
                origin: v.origin,
                destination: v.destination,
            })
            .collect();
        match self.cost_mode {
            CostMode::Euclidean => Instance::euclidean(self.q, vehicles, self.demands),
            CostMode::Graph => {
                let rel = self
                    .graph_file
                    .ok_or_else(|| Error::invalid("cost_mode \"graph\" requires graph_file"))?;
                let path = if rel.is_absolute() {
                    rel.clone()
                } else {
                    base_dir.join(&rel)
                };
                let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
                let edges = read_edge_list(file)?;
                Ok(
                    Instance::on_graph(self.q, vehicles, self.demands, &edges)?
                        .with_graph_file(rel),
                )
            }
        }
    }
}

impl Instance {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: InstanceFile = serde_json::from_str(&text)?;
        file.into_instance(path.parent().unwrap_or(Path::new(".")))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&InstanceFile::from_instance(
            self,
        ))?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Reads demands from `pickup_x,pickup_y,drop_x,drop_y[,group_size]` rows,
/// in file order. A missing or empty group size means 1.
pub fn ingest_demands<R: Read>(reader: R) -> Result<Vec<Demand>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() < 4 || rec.len() > 5 {
            return Err(Error::Parse {
                line,
                message: format!("expected 4 or 5 fields, found {}", rec.len()),
            });
        }
        let num = |idx: usize| -> Result<f64> {
            let raw = &rec[idx];
            let x: f64 = raw.parse().map_err(|_| Error::Parse {
                line,
                message: format!("field {} ({raw:?}) is not a number", idx + 1),
            })?;
            if !x.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("field {} is not finite", idx + 1),
                });
            }
            Ok(x)
        };
        let group = match rec.get(4) {
            None | Some("") => 1,
            Some(raw) => match raw.parse::<u32>() {
                Ok(g) if g >= 1 => g,
                _ => {
                    return Err(Error::Parse {
                        line,
                        message: format!("group size {raw:?} is not a positive integer"),
                    })
                }
            },
        };
        out.push(Demand {
            pickup: Location::Point([num(0)?, num(1)?]),
            delivery: Location::Point([num(2)?, num(3)?]),
            group,
        });
    }
    Ok(out)
}
