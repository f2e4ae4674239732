//! Parameter grids: `lo:hi:count` (linear, inclusive), `log:lo:hi:count`
//! (geometric), a comma list, or a single value.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Grid {
    Linear { lo: f64, hi: f64, count: usize },
    Log { lo: f64, hi: f64, count: usize },
    List(Vec<f64>),
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match *self {
            Grid::Linear { lo, hi, count } => {
                if count == 1 {
                    return vec![lo];
                }
                (0..count)
                    .map(|i| {
                        if i + 1 == count {
                            hi
                        } else {
                            lo + (hi - lo) * i as f64 / (count - 1) as f64
                        }
                    })
                    .collect()
            }
            Grid::Log { lo, hi, count } => {
                if count == 1 {
                    return vec![lo];
                }
                let (a, b) = (lo.ln(), hi.ln());
                (0..count)
                    .map(|i| match i {
                        0 => lo,
                        _ if i + 1 == count => hi,
                        _ => (a + (b - a) * i as f64 / (count - 1) as f64).exp(),
                    })
                    .collect()
            }
            Grid::List(ref v) => v.clone(),
        }
    }

    pub fn single(v: f64) -> Self {
        Grid::List(vec![v])
    }
}

fn number(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if !v.is_finite() {
        return Err(format!("`{s}` is not finite"));
    }
    Ok(v)
}

fn range(parts: &[&str], geometric: bool) -> Result<Grid, String> {
    let [lo, hi, count] = parts else {
        return Err("expected lo:hi:count".into());
    };
    let (lo, hi) = (number(lo)?, number(hi)?);
    let count: usize = count
        .trim()
        .parse()
        .map_err(|_| format!("count `{count}` is not a positive integer"))?;
    if count == 0 {
        return Err("count must be positive".into());
    }
    if hi < lo {
        return Err(format!("upper end {hi} is below lower end {lo}"));
    }
    if geometric {
        if !(lo > 0.0) {
            return Err("geometric grids need positive endpoints".into());
        }
        Ok(Grid::Log { lo, hi, count })
    } else {
        Ok(Grid::Linear { lo, hi, count })
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("log:") {
            return range(&rest.split(':').collect::<Vec<_>>(), true);
        }
        if s.contains(':') {
            return range(&s.split(':').collect::<Vec<_>>(), false);
        }
        let v = s.split(',').map(number).collect::<Result<Vec<_>, _>>()?;
        if v.is_empty() {
            return Err("empty grid".into());
        }
        Ok(Grid::List(v))
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Grid::Linear { lo, hi, count } => write!(f, "{lo:?}:{hi:?}:{count}"),
            Grid::Log { lo, hi, count } => write!(f, "log:{lo:?}:{hi:?}:{count}"),
            Grid::List(v) => {
                let parts: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
                write!(f, "{}", parts.join(","))
            }
        }
    }
}

impl TryFrom<String> for Grid {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<Grid> for String {
    fn from(g: Grid) -> String {
        g.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_forms() {
        assert_eq!("0.5:1.5:3".parse::<Grid>().unwrap().values(), vec![0.5, 1.0, 1.5]);
        let g = "log:1:100:3".parse::<Grid>().unwrap().values();
        assert!((g[1] - 10.0).abs() < 1e-12 && g[2] == 100.0);
        assert_eq!("2,3.5".parse::<Grid>().unwrap().values(), vec![2.0, 3.5]);
        assert_eq!("7".parse::<Grid>().unwrap().values(), vec![7.0]);
    }

    #[test]
    fn rejects_malformed() {
        for bad in ["1:2", "1:2:0", "2:1:5", "log:0:1:4", "a:b:c", "", "1:2:3:4", "nan"] {
            assert!(bad.parse::<Grid>().is_err(), "{bad}");
        }
    }

    #[test]
    fn display_round_trips() {
        for s in ["0.1:0.30000000000000004:7", "log:0.001:2.5:64", "1,2,3.25"] {
            let g: Grid = s.parse().unwrap();
            assert_eq!(g.to_string().parse::<Grid>().unwrap(), g);
        }
    }

    proptest::proptest! {
        #[test]
        fn grids_round_trip_and_keep_their_ends(lo in 1e-6f64..1e3, span in 0.0f64..1e3, count in 1usize..200, log in proptest::bool::ANY) {
            let hi = lo + span;
            let g = if log { Grid::Log { lo, hi, count } } else { Grid::Linear { lo, hi, count } };
            proptest::prop_assert_eq!(g.to_string().parse::<Grid>().unwrap(), g.clone());
            let v = g.values();
            proptest::prop_assert_eq!(v.len(), count);
            proptest::prop_assert_eq!(v[0], lo);
            if count > 1 {
                proptest::prop_assert_eq!(v[count - 1], hi);
            }
            proptest::prop_assert!(v.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
