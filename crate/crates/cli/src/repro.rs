//! Canned sweeps for the standard figures.

use std::fmt;
use std::str::FromStr;

use mplql::montecarlo::FULL_REALIZATIONS;

use crate::config::Setting;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Throughput vs load for several level counts.
    Fig4,
    /// Latency vs load, same grid as `Fig4`.
    Fig5,
    /// Interference and convergence traces.
    Fig6,
    /// All protocols vs load.
    Fig7,
    /// Imperfect cancellation.
    Fig8,
    /// Learning rate sensitivity.
    Fig9,
}

impl Figure {
    pub const ALL: [Figure; 6] = [
        Figure::Fig4,
        Figure::Fig5,
        Figure::Fig6,
        Figure::Fig7,
        Figure::Fig8,
        Figure::Fig9,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
            Figure::Fig6 => "fig6",
            Figure::Fig7 => "fig7",
            Figure::Fig8 => "fig8",
            Figure::Fig9 => "fig9",
        }
    }

    /// Preset settings; `full` raises the realization count.
    pub fn preset(self, full: bool) -> Vec<Setting> {
        let loads = "1,2,3,4,5,6,7,8,9,10";
        let pairs: Vec<(&str, &str)> = match self {
            Figure::Fig4 | Figure::Fig5 => vec![
                ("protocol", "mpl-ql"),
                ("load", "0.25,0.5,1,2,3,4,5,6,7,8,9,10"),
                ("levels", "2,4,8,12,16"),
            ],
            Figure::Fig6 => vec![
                ("protocol", "mpl-ql"),
                ("load", "3,6"),
                ("levels", "2,8"),
                ("format", "json"),
            ],
            Figure::Fig7 => vec![
                (
                    "protocol",
                    "mpl-ql,independent-ql,collaborative-ql,packet-ql,slotted-aloha",
                ),
                ("load", loads),
                ("levels", "8"),
            ],
            Figure::Fig8 => vec![
                ("protocol", "independent-ql,packet-ql,mpl-ql"),
                ("load", loads),
                ("levels", "8"),
                ("beta", "0,0.01,0.02"),
            ],
            Figure::Fig9 => vec![
                ("protocol", "mpl-ql"),
                ("load", "5"),
                ("levels", "2,4,8,12,16"),
                ("alpha", "0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5"),
            ],
        };
        let name = self.as_str();
        let mut out: Vec<Setting> = pairs
            .into_iter()
            .map(|(k, v)| Setting::preset(name, k, v))
            .collect();
        if full {
            out.push(Setting::preset(
                name,
                "runs",
                &FULL_REALIZATIONS.to_string(),
            ));
        }
        out
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Figure {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Figure::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| format!("unknown figure `{s}` (expected fig4..fig9)"))
    }
}
