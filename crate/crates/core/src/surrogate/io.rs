//! JSON persistence. Ψ is not stored: it is re-solved from the embedded
//! source description and grid size, which is deterministic.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BuildConfig, DiscardedComponent, FieldComponent, Surrogate};
use crate::error::{Error, Result};
use crate::geometry::{Domain, Ring};
use crate::radial::{solve_radial, SourceSpec};

const FORMAT: &str = "raywave-surrogate";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiGridSpec {
    pub t_max: f64,
    pub n_rho: usize,
    pub n_t: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub outer: Ring,
    #[serde(default)]
    pub holes: Vec<Ring>,
    pub unbounded: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateFile {
    pub format: String,
    pub version: u32,
    pub domain: DomainSpec,
    pub source: SourceSpec,
    pub psi: PsiGridSpec,
    pub config: BuildConfig,
    pub components: Vec<FieldComponent>,
    #[serde(default)]
    pub discarded: Vec<DiscardedComponent>,
}

impl SurrogateFile {
    pub fn from_surrogate(s: &Surrogate) -> Self {
        let mut rings = s.domain.rings();
        let outer = rings.remove(0);
        SurrogateFile {
            format: FORMAT.into(),
            version: VERSION,
            domain: DomainSpec {
                outer,
                holes: rings,
                unbounded: s.domain.unbounded,
            },
            source: s.source,
            psi: PsiGridSpec {
                t_max: s.psi.t_max,
                n_rho: s.psi.n_rho,
                n_t: s.psi.n_t,
            },
            config: s.config,
            components: s.components.clone(),
            discarded: s.discarded.clone(),
        }
    }

    pub fn into_surrogate(self) -> Result<Surrogate> {
        if self.format != FORMAT || self.version != VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported surrogate file ({} v{})",
                self.format, self.version
            )));
        }
        let domain = Domain::new(self.domain.outer, self.domain.holes, self.domain.unbounded)?;
        let psi = solve_radial(&self.source, self.psi.t_max, self.psi.n_rho, self.psi.n_t)?;
        for (i, c) in self.components.iter().enumerate() {
            let bad_parent = c.parent.is_some_and(|p| p >= i);
            if c.index != i || bad_parent || (i == 0) != c.parent.is_none() {
                return Err(Error::InvalidArgument(format!(
                    "component {i} has inconsistent indices"
                )));
            }
        }
        Ok(Surrogate {
            domain,
            source: self.source,
            psi,
            config: self.config,
            components: self.components,
            discarded: self.discarded,
        })
    }
}

impl Surrogate {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(
            &SurrogateFile::from_surrogate(self),
        )?)
    }

    pub fn from_json(text: &str) -> Result<Surrogate> {
        serde_json::from_str::<SurrogateFile>(text)?.into_surrogate()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, &SurrogateFile::from_surrogate(self))?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Surrogate> {
        let file: SurrogateFile = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        file.into_surrogate()
    }
}
