use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Nested pivot sets of a tensor-train cross. For cut `k` (between sites
/// `k - 1` and `k`, `k = 1..N`), `left(k)` holds prefixes over sites `0..k`
/// and `right(k)` suffixes over sites `k..N`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CrossSkeleton {
    dims: Vec<usize>,
    left: Vec<Vec<Vec<u8>>>,
    right: Vec<Vec<Vec<u8>>>,
}

impl CrossSkeleton {
    pub fn new(dims: Vec<usize>, left: Vec<Vec<Vec<u8>>>, right: Vec<Vec<Vec<u8>>>) -> Result<Self> {
        let cuts = dims.len().saturating_sub(1);
        if left.len() != cuts || right.len() != cuts {
            return Err(Error::InvalidArgument(format!("{} sites need {cuts} cuts, got {} left and {} right sets", dims.len(), left.len(), right.len())));
        }
        let sk = Self { dims, left, right };
        sk.validate()?;
        Ok(sk)
    }

    fn validate(&self) -> Result<()> {
        let n = self.dims.len();
        for k in 1..n {
            let (l, r) = (self.left(k), self.right(k));
            if l.is_empty() || r.is_empty() {
                return Err(Error::Format(format!("cut {k}: empty pivot set")));
            }
            if l.iter().any(|t| t.len() != k) || r.iter().any(|t| t.len() != n - k) {
                return Err(Error::Format(format!("cut {k}: tuple of wrong length")));
            }
            let in_range = |t: &[u8], off: usize| t.iter().enumerate().all(|(i, &g)| (g as usize) < self.dims[off + i]);
            if !l.iter().all(|t| in_range(t, 0)) || !r.iter().all(|t| in_range(t, k)) {
                return Err(Error::Format(format!("cut {k}: index outside physical dimension")));
            }
        }
        Ok(())
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn left(&self, cut: usize) -> &[Vec<u8>] {
        &self.left[cut - 1]
    }

    pub fn right(&self, cut: usize) -> &[Vec<u8>] {
        &self.right[cut - 1]
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.left.iter().map(Vec::len).collect()
    }

    /// True when every left tuple at cut `k + 1` extends one at cut `k`, and
    /// every right tuple at cut `k` extends one at cut `k + 1`.
    pub fn is_nested(&self) -> bool {
        let n = self.dims.len();
        (1..n.saturating_sub(1)).all(|k| {
            self.left(k + 1).iter().all(|t| self.left(k).iter().any(|p| p[..] == t[..k]))
                && self.right(k).iter().all(|t| self.right(k + 1).iter().any(|s| s[..] == t[1..]))
        })
    }

    /// Full indices `i ++ j` for `i` in `left(k)`, `j` in `right(k)`, every cut.
    pub fn cross_indices(&self) -> Vec<Vec<u8>> {
        let mut out = Vec::new();
        for k in 1..self.dims.len() {
            for i in self.left(k) {
                for j in self.right(k) {
                    let mut idx = i.clone();
                    idx.extend_from_slice(j);
                    out.push(idx);
                }
            }
        }
        out
    }
}

fn write_tuple(f: &mut fmt::Formatter<'_>, t: &[u8]) -> fmt::Result {
    let parts: Vec<String> = t.iter().map(|g| g.to_string()).collect();
    write!(f, "{}", parts.join("."))
}

/// One header line with the site dimensions, then one line per cut:
/// `cut left_count right_count | left tuples | right tuples`, tuples
/// dot-separated.
impl fmt::Display for CrossSkeleton {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dims: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        writeln!(f, "dims {}", dims.join(" "))?;
        for k in 1..self.dims.len() {
            write!(f, "{k} {} {} |", self.left(k).len(), self.right(k).len())?;
            for t in self.left(k) {
                write!(f, " ")?;
                write_tuple(f, t)?;
            }
            write!(f, " |")?;
            for t in self.right(k) {
                write!(f, " ")?;
                write_tuple(f, t)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl FromStr for CrossSkeleton {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut lines = s.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::Format("empty skeleton".into()))?;
        let dims = header
            .strip_prefix("dims")
            .ok_or_else(|| Error::Format("missing dims header".into()))?
            .split_whitespace()
            .map(|d| d.parse::<usize>().map_err(|e| Error::Format(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let parse_tuples = |part: &str| -> Result<Vec<Vec<u8>>> {
            part.split_whitespace()
                .map(|t| t.split('.').map(|g| g.parse::<u8>().map_err(|e| Error::Format(e.to_string()))).collect())
                .collect()
        };
        let mut left = Vec::new();
        let mut right = Vec::new();
        for (expected, line) in (1..).zip(lines) {
            let parts: Vec<&str> = line.split('|').collect();
            if parts.len() != 3 {
                return Err(Error::Format(format!("malformed cut line {line:?}")));
            }
            let head: Vec<usize> = parts[0].split_whitespace().map(|x| x.parse().map_err(|_| Error::Format(format!("bad cut header {:?}", parts[0])))).collect::<Result<_>>()?;
            if head.len() != 3 || head[0] != expected {
                return Err(Error::Format(format!("expected cut {expected}, got {:?}", parts[0])));
            }
            let l = parse_tuples(parts[1])?;
            let r = parse_tuples(parts[2])?;
            if l.len() != head[1] || r.len() != head[2] {
                return Err(Error::Format(format!("cut {expected}: counts {:?} do not match tuples", &head[1..])));
            }
            left.push(l);
            right.push(r);
        }
        Self::new(dims, left, right)
    }
}
