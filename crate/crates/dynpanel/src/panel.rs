//! Data model for binary-choice panels and extraction of the four-period
//! estimation windows the objective functions consume.
//!
//! A window is centered at an interior period `t` and needs the choice two
//! periods back (the initial status when the window sits at the front of
//! the panel), the neighboring covariates, and the middle-period special
//! regressor:
//!
//! ```text
//! chi_bar = ( y_t - y_{t-2}, x_{t+1} - x_{t-1}, z_{t+1} - z_{t-1} )
//! weight  = y_t          (upper trim)  or  1 - y_t  (lower trim)
//! switch  = y_{t+1} - y_{t-1}
//! trim on   z_t
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One observed period of one individual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Period {
    /// Integer time index; strictly increasing within an individual.
    pub t: i64,
    /// Binary choice.
    pub y: u8,
    /// Ordinary covariates, length = dataset `p`.
    pub x: Vec<f64>,
    /// Special regressor.
    pub z: f64,
}

/// One individual: an initial status plus the periods observed after it.
///
/// The initial period contributes only its choice; its covariates are never
/// used and are not stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndividualRecord {
    /// Identifier carried through from ingestion, for provenance.
    pub id: String,
    /// Time index of the initial status.
    pub t0: i64,
    /// Initial choice.
    pub y0: u8,
    /// Observed periods, sorted by `t`.
    pub periods: Vec<Period>,
}

impl IndividualRecord {
    fn period_at(&self, t: i64) -> Option<&Period> {
        self.periods
            .binary_search_by_key(&t, |p| p.t)
            .ok()
            .map(|i| &self.periods[i])
    }

    /// Choice at time `t`, drawing on the initial status when applicable.
    fn choice_at(&self, t: i64) -> Option<u8> {
        if t == self.t0 {
            Some(self.y0)
        } else {
            self.period_at(t).map(|p| p.y)
        }
    }
}

/// A (possibly unbalanced) binary-choice panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelDataset {
    pub individuals: Vec<IndividualRecord>,
    /// Number of ordinary covariates (length of each `x`).
    pub p: usize,
}

impl PanelDataset {
    pub fn n_individuals(&self) -> usize {
        self.individuals.len()
    }

    /// Total number of observed periods beyond the initial statuses.
    pub fn n_observations(&self) -> usize {
        self.individuals.iter().map(|i| i.periods.len()).sum()
    }
}

/// Parameter point on the unit sphere with named component blocks:
/// the lagged-choice coefficient, the ordinary-covariate slopes, and the
/// special-regressor coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub lag: f64,
    pub slopes: Vec<f64>,
    pub special: f64,
}

impl Coefficients {
    pub fn new(lag: f64, slopes: Vec<f64>, special: f64) -> Self {
        Self { lag, slopes, special }
    }

    /// Reconstruct from the ambient layout `(lag, slopes..., special)`.
    pub fn from_slice(v: &[f64]) -> Self {
        assert!(v.len() >= 2, "coefficient vector needs at least two entries");
        Self {
            lag: v[0],
            slopes: v[1..v.len() - 1].to_vec(),
            special: v[v.len() - 1],
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.push(self.lag);
        v.extend_from_slice(&self.slopes);
        v.push(self.special);
        v
    }

    /// Ambient dimension `p + 2`.
    pub fn dim(&self) -> usize {
        self.slopes.len() + 2
    }

    pub fn norm(&self) -> f64 {
        self.to_vec().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Whether the point sits on the unit sphere within 1e-10.
    pub fn is_unit_norm(&self) -> bool {
        (self.norm() - 1.0).abs() <= 1e-10
    }

    /// Inner product with a window's difference regressor.
    pub fn dot_window(&self, chi_bar: &[f64]) -> f64 {
        debug_assert_eq!(chi_bar.len(), self.dim());
        let mut acc = self.lag * chi_bar[0];
        for (k, b) in self.slopes.iter().enumerate() {
            acc += b * chi_bar[1 + k];
        }
        acc + self.special * chi_bar[chi_bar.len() - 1]
    }
}

/// One usable four-period window, reduced to what the objectives consume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationWindow {
    /// Position of the owning individual in the dataset.
    pub individual: usize,
    /// Time index of the middle period.
    pub t_mid: i64,
    /// Special regressor at the middle period (trim variable).
    pub z_mid: f64,
    /// Choice at the middle period (weight selector).
    pub y_mid: u8,
    /// `y_{t+1} - y_{t-1}`; zero for non-switchers.
    pub d_switch: i8,
    /// Difference regressor of length `p + 2`, ordered
    /// (lag slot, x slots, z slot).
    pub chi_bar: Vec<f64>,
}

impl EstimationWindow {
    pub fn is_switcher(&self) -> bool {
        self.d_switch != 0
    }
}

/// Windows bundled with the divisor the sample objectives need: the number
/// of individuals in the originating dataset, not the number of windows.
#[derive(Debug, Clone)]
pub struct WindowSet {
    windows: Vec<EstimationWindow>,
    n_individuals: usize,
    p: usize,
}

impl WindowSet {
    pub fn new(windows: Vec<EstimationWindow>, n_individuals: usize, p: usize) -> Self {
        Self { windows, n_individuals, p }
    }

    pub fn from_dataset(dataset: &PanelDataset) -> Self {
        Self {
            windows: extract_windows(dataset),
            n_individuals: dataset.n_individuals(),
            p: dataset.p,
        }
    }

    pub fn windows(&self) -> &[EstimationWindow] {
        &self.windows
    }

    pub fn n_individuals(&self) -> usize {
        self.n_individuals
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Ambient parameter dimension `p + 2`.
    pub fn dim(&self) -> usize {
        self.p + 2
    }

    /// Middle-period special-regressor values, pooled across all windows.
    pub fn z_mid_values(&self) -> Vec<f64> {
        self.windows.iter().map(|w| w.z_mid).collect()
    }
}

/// How to treat individuals whose observed periods have gaps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GapPolicy {
    /// Emit only the windows whose four periods are consecutively observed;
    /// skip the rest.
    #[default]
    Skip,
    /// Fail on the first individual with non-consecutive periods.
    Strict,
}

/// Extract every usable window: one per individual per interior period
/// whose four required periods are consecutively observed. Pure function of
/// the dataset.
pub fn extract_windows(dataset: &PanelDataset) -> Vec<EstimationWindow> {
    extract_windows_with(dataset, GapPolicy::Skip).expect("skip policy is infallible")
}

/// As [`extract_windows`], with an explicit gap policy.
pub fn extract_windows_with(
    dataset: &PanelDataset,
    policy: GapPolicy,
) -> Result<Vec<EstimationWindow>> {
    let mut out = Vec::new();
    for (idx, ind) in dataset.individuals.iter().enumerate() {
        if policy == GapPolicy::Strict {
            let mut prev = ind.t0;
            for period in &ind.periods {
                if period.t != prev + 1 {
                    return Err(Error::GapPolicy {
                        id: ind.id.clone(),
                        detail: format!("period {} does not follow {}", period.t, prev),
                    });
                }
                prev = period.t;
            }
        }
        for mid in &ind.periods {
            let t = mid.t;
            let (Some(y_back), Some(before), Some(after)) =
                (ind.choice_at(t - 2), ind.period_at(t - 1), ind.period_at(t + 1))
            else {
                continue;
            };
            let mut chi_bar = Vec::with_capacity(dataset.p + 2);
            chi_bar.push(f64::from(mid.y) - f64::from(y_back));
            for k in 0..dataset.p {
                chi_bar.push(after.x[k] - before.x[k]);
            }
            chi_bar.push(after.z - before.z);
            out.push(EstimationWindow {
                individual: idx,
                t_mid: t,
                z_mid: mid.z,
                y_mid: mid.y,
                d_switch: after.y as i8 - before.y as i8,
                chi_bar,
            });
        }
    }
    Ok(out)
}

/// Non-mutating diagnostic summary of a dataset.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub n_individuals: usize,
    pub n_observations: usize,
    /// Usable window count per individual, in dataset order.
    pub windows_per_individual: Vec<usize>,
    pub total_windows: usize,
    /// Fraction of usable windows with `y_{t+1} != y_{t-1}`.
    pub switcher_fraction: f64,
    /// Invariant violations, empty when the dataset is well formed.
    pub issues: Vec<String>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Check dataset invariants and report per-individual window counts and the
/// switcher fraction.
pub fn validate(dataset: &PanelDataset) -> ValidationReport {
    let mut issues = Vec::new();
    for ind in &dataset.individuals {
        if ind.periods.is_empty() {
            issues.push(format!("individual {}: no observed period beyond the initial one", ind.id));
        }
        if ind.y0 > 1 {
            issues.push(format!("individual {}: initial status {} not in {{0,1}}", ind.id, ind.y0));
        }
        let mut prev = i64::MIN;
        for period in &ind.periods {
            if period.t <= prev {
                issues.push(format!(
                    "individual {}: time indices not strictly increasing at t={}",
                    ind.id, period.t
                ));
            }
            prev = period.t;
            if period.y > 1 {
                issues.push(format!(
                    "individual {}: y={} at t={} not in {{0,1}}",
                    ind.id, period.y, period.t
                ));
            }
            if period.x.len() != dataset.p {
                issues.push(format!(
                    "individual {}: x has length {} at t={}, dataset p is {}",
                    ind.id,
                    period.x.len(),
                    period.t,
                    dataset.p
                ));
            }
        }
    }

    let windows = extract_windows(dataset);
    let mut per_individual = vec![0usize; dataset.n_individuals()];
    let mut switchers = 0usize;
    for w in &windows {
        per_individual[w.individual] += 1;
        if w.is_switcher() {
            switchers += 1;
        }
    }
    let switcher_fraction = if windows.is_empty() {
        0.0
    } else {
        switchers as f64 / windows.len() as f64
    };

    ValidationReport {
        n_individuals: dataset.n_individuals(),
        n_observations: dataset.n_observations(),
        windows_per_individual: per_individual,
        total_windows: windows.len(),
        switcher_fraction,
        issues,
    }
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

/// Sort key for identifiers: numeric when every id parses as an integer,
/// lexicographic otherwise.
fn id_sort_key(id: &str, all_numeric: bool) -> (Option<i128>, String) {
    if all_numeric {
        (id.parse::<i128>().ok(), id.to_string())
    } else {
        (None, id.to_string())
    }
}

struct RawRow {
    line: usize,
    t: i64,
    y: u8,
    z: f64,
    x: Vec<f64>,
    y0: Option<u8>,
}

/// Read a panel from CSV.
///
/// Expected header: `id`, `t`, `y` (0/1), `z`, `x1`..`xp`, with an optional
/// `y0` column. Without `y0`, the earliest row of each individual is
/// consumed as its initial status and its covariates are discarded. Rows
/// are grouped by id and sorted by `t`, so row order in the file does not
/// matter. When `expected_p` is given the header must declare exactly that
/// many `x` columns.
pub fn read_csv(path: &Path, expected_p: Option<usize>) -> Result<PanelDataset> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();

    let find = |name: &str| headers.iter().position(|h| h == name);
    let id_col = find("id").ok_or_else(|| Error::Schema("missing column `id`".into()))?;
    let t_col = find("t").ok_or_else(|| Error::Schema("missing column `t`".into()))?;
    let y_col = find("y").ok_or_else(|| Error::Schema("missing column `y`".into()))?;
    let z_col = find("z").ok_or_else(|| Error::Schema("missing column `z`".into()))?;
    let y0_col = find("y0");

    let mut x_cols = Vec::new();
    loop {
        match find(&format!("x{}", x_cols.len() + 1)) {
            Some(c) => x_cols.push(c),
            None => break,
        }
    }
    if let Some(p) = expected_p {
        if x_cols.len() != p {
            return Err(Error::Schema(format!(
                "expected {} x columns, header declares {}",
                p,
                x_cols.len()
            )));
        }
    }
    let p = x_cols.len();

    let mut groups: BTreeMap<String, Vec<RawRow>> = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2; // header is line 1
        let record = record?;
        let field = |col: usize| -> Result<&str> {
            record.get(col).ok_or_else(|| Error::Parse {
                line,
                message: "row has too few fields".into(),
            })
        };
        let parse_f64 = |col: usize| -> Result<f64> {
            let s = field(col)?;
            s.trim().parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("cannot parse `{s}` as a number"),
            })
        };
        let parse_binary = |col: usize, name: &str| -> Result<u8> {
            let s = field(col)?;
            let v = s.trim().parse::<i64>().map_err(|_| Error::Parse {
                line,
                message: format!("cannot parse `{s}` as an integer"),
            })?;
            if v == 0 || v == 1 {
                Ok(v as u8)
            } else {
                Err(Error::Domain(format!("line {line}: {name}={v} not in {{0,1}}")))
            }
        };

        let id = field(id_col)?.trim().to_string();
        let t = field(t_col)?.trim().parse::<i64>().map_err(|_| Error::Parse {
            line,
            message: "cannot parse `t` as an integer".into(),
        })?;
        let y = parse_binary(y_col, "y")?;
        let z = parse_f64(z_col)?;
        let x = x_cols.iter().map(|&c| parse_f64(c)).collect::<Result<Vec<_>>>()?;
        let y0 = match y0_col {
            Some(c) => Some(parse_binary(c, "y0")?),
            None => None,
        };
        groups.entry(id).or_default().push(RawRow { line, t, y, z, x, y0 });
    }

    let all_numeric = groups.keys().all(|id| id.parse::<i128>().is_ok());
    let mut ids: Vec<String> = groups.keys().cloned().collect();
    ids.sort_by_key(|id| id_sort_key(id, all_numeric));

    let mut individuals = Vec::with_capacity(ids.len());
    for id in ids {
        let mut rows = groups.remove(&id).expect("id came from the map");
        rows.sort_by_key(|r| r.t);
        for pair in rows.windows(2) {
            if pair[0].t == pair[1].t {
                return Err(Error::Domain(format!(
                    "individual {}: duplicate period t={} (line {})",
                    id, pair[1].t, pair[1].line
                )));
            }
        }

        let (t0, y0, periods) = if y0_col.is_some() {
            let y0 = rows[0].y0.expect("y0 column present");
            if rows.iter().any(|r| r.y0 != Some(y0)) {
                return Err(Error::Domain(format!(
                    "individual {id}: inconsistent y0 values across rows"
                )));
            }
            (rows[0].t - 1, y0, rows)
        } else {
            if rows.len() < 2 {
                return Err(Error::Domain(format!(
                    "individual {id}: only the initial row is present; at least one \
                     further period is required"
                )));
            }
            let first = rows.remove(0);
            (first.t, first.y, rows)
        };

        individuals.push(IndividualRecord {
            id,
            t0,
            y0,
            periods: periods
                .into_iter()
                .map(|r| Period { t: r.t, y: r.y, x: r.x, z: r.z })
                .collect(),
        });
    }

    Ok(PanelDataset { individuals, p })
}

/// Write a panel in the standard CSV schema.
///
/// The initial status is emitted as the earliest row of each individual
/// with zeroed covariates (they carry no information and are ignored on
/// ingestion).
pub fn write_csv(dataset: &PanelDataset, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec!["id".to_string(), "t".to_string(), "y".to_string(), "z".to_string()];
    for k in 1..=dataset.p {
        header.push(format!("x{k}"));
    }
    writer.write_record(&header)?;

    let zeros = vec![0.0; dataset.p];
    for ind in &dataset.individuals {
        write_row(&mut writer, &ind.id, ind.t0, ind.y0, 0.0, &zeros)?;
        for period in &ind.periods {
            write_row(&mut writer, &ind.id, period.t, period.y, period.z, &period.x)?;
        }
    }
    writer.flush()?;
    Ok(())
}

fn write_row<W: std::io::Write>(
    writer: &mut csv::Writer<W>,
    id: &str,
    t: i64,
    y: u8,
    z: f64,
    x: &[f64],
) -> Result<()> {
    let mut record = vec![id.to_string(), t.to_string(), y.to_string(), z.to_string()];
    for v in x {
        record.push(v.to_string());
    }
    writer.write_record(&record)?;
    Ok(())
}
