//! Grantham distances between amino acids and the nearest-neighbour pairwise
//! amino-acid ordering (NNPAAO) used as `eta` for chain-GTR protein models.

use crate::error::{Error, Result};
use crate::ratematrix::PairOrdering;

/// Amino-acid alphabet in the row/column order of [`GRANTHAM`].
pub const ALPHABET: [char; 20] = [
    'Y', 'H', 'Q', 'R', 'T', 'N', 'K', 'D', 'E', 'G', 'F', 'L', 'A', 'S', 'P', 'I', 'M', 'V', 'C',
    'W',
];

#[rustfmt::skip]
pub const GRANTHAM: [[u16; 20]; 20] = [
    //  Y    H    Q    R    T    N    K    D    E    G    F    L    A    S    P    I    M    V    C    W
    [   0,  83,  99,  77,  92, 143,  85, 160, 122, 147,  22,  36, 112, 144, 110,  33,  36,  55, 194,  37], // Y
    [  83,   0,  24,  29,  47,  68,  32,  81,  40,  98, 100,  99,  86,  89,  77,  94,  87,  84, 174, 115], // H
    [  99,  24,   0,  43,  42,  46,  53,  61,  29,  87, 116, 113,  91,  68,  76, 109, 101,  96, 154, 130], // Q
    [  77,  29,  43,   0,  71,  86,  26,  96,  54, 125,  97, 102, 112, 110, 103,  97,  91,  96, 180, 102], // R
    [  92,  47,  42,  71,   0,  65,  78,  85,  65,  59, 103,  92,  58,  58,  38,  89,  81,  69, 149, 128], // T
    [ 143,  68,  46,  86,  65,   0,  94,  23,  42,  80, 158, 153, 111,  46,  91, 149, 142, 133, 139, 174], // N
    [  85,  32,  53,  26,  78,  94,   0, 101,  56, 127, 102, 107, 106, 121, 103, 102,  95,  97, 202, 110], // K
    [ 160,  81,  61,  96,  85,  23, 101,   0,  45,  94, 177, 172, 126,  65, 108, 168, 160, 152, 154, 181], // D
    [ 122,  40,  29,  54,  65,  42,  56,  45,   0,  98, 140, 138, 107,  80,  93, 134, 126, 121, 170, 152], // E
    [ 147,  98,  87, 125,  59,  80, 127,  94,  98,   0, 153, 138,  60,  56,  42, 135, 127, 109, 159, 184], // G
    [  22, 100, 116,  97, 103, 158, 102, 177, 140, 153,   0,  22, 113, 155, 114,  21,  28,  50, 205,  40], // F
    [  36,  99, 113, 102,  92, 153, 107, 172, 138, 138,  22,   0,  96, 145,  98,   5,  15,  32, 198,  61], // L
    [ 112,  86,  91, 112,  58, 111, 106, 126, 107,  60, 113,  96,   0,  99,  27,  94,  84,  64, 195, 148], // A
    [ 144,  89,  68, 110,  58,  46, 121,  65,  80,  56, 155, 145,  99,   0,  74, 142, 135, 124, 112, 177], // S
    [ 110,  77,  76, 103,  38,  91, 103, 108,  93,  42, 114,  98,  27,  74,   0,  95,  87,  68, 169, 147], // P
    [  33,  94, 109,  97,  89, 149, 102, 168, 134, 135,  21,   5,  94, 142,  95,   0,  10,  29, 198,  61], // I
    [  36,  87, 101,  91,  81, 142,  95, 160, 126, 127,  28,  15,  84, 135,  87,  10,   0,  21, 196,  67], // M
    [  55,  84,  96,  96,  69, 133,  97, 152, 121, 109,  50,  32,  64, 124,  68,  29,  21,   0, 192,  88], // V
    [ 194, 174, 154, 180, 149, 139, 202, 154, 170, 159, 205, 198, 195, 112, 169, 198, 196, 192,   0, 215], // C
    [  37, 115, 130, 102, 128, 174, 110, 181, 152, 184,  40,  61, 148, 177, 147,  61,  67,  88, 215,   0], // W
];

pub const NUM_AMINO_ACIDS: usize = 20;
pub const NUM_AMINO_PAIRS: usize = 190;

pub fn aa_index(c: char) -> Option<usize> {
    let c = c.to_ascii_uppercase();
    ALPHABET.iter().position(|&a| a == c)
}

fn parse_aa(label: &str) -> Result<usize> {
    let mut chars = label.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => {
            aa_index(c).ok_or_else(|| Error::arg(format!("unknown amino acid '{label}'")))
        }
        _ => Err(Error::arg(format!("unknown amino acid '{label}'"))),
    }
}

/// A symmetric, zero-diagonal distance table over [`ALPHABET`].
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceTable {
    d: [[u16; 20]; 20],
}

impl Default for DistanceTable {
    fn default() -> Self {
        Self::grantham()
    }
}

impl DistanceTable {
    pub fn grantham() -> Self {
        DistanceTable { d: GRANTHAM }
    }

    pub fn new(d: [[u16; 20]; 20]) -> Result<Self> {
        for i in 0..20 {
            if d[i][i] != 0 {
                return Err(Error::arg(format!("non-zero diagonal at {}", ALPHABET[i])));
            }
            for j in 0..20 {
                if d[i][j] != d[j][i] {
                    return Err(Error::arg(format!(
                        "asymmetric distance between {} and {}",
                        ALPHABET[i], ALPHABET[j]
                    )));
                }
            }
        }
        Ok(DistanceTable { d })
    }

    pub fn get(&self, i: usize, j: usize) -> u16 {
        self.d[i][j]
    }

    /// Comma-separated export with a header row of amino-acid letters.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("aa");
        for c in ALPHABET {
            out.push(',');
            out.push(c);
        }
        out.push('\n');
        for (i, row) in self.d.iter().enumerate() {
            out.push(ALPHABET[i]);
            for v in row {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Grantham distance between two amino acids given by one-letter labels.
pub fn grantham_distance(a: &str, b: &str) -> Result<u16> {
    Ok(GRANTHAM[parse_aa(a)?][parse_aa(b)?])
}

/// Rank of every unordered amino-acid pair produced by [`nnpaao_ordering`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairRank {
    /// Pairs in rank order, as alphabet indices with the orientation the
    /// traversal produced them in.
    pub ranked: Vec<(usize, usize)>,
    /// Ranks at which the traversal restarted from the globally smallest
    /// remaining pair because both end-point supports were exhausted.
    pub restarts: Vec<usize>,
}

impl PairRank {
    pub fn len(&self) -> usize {
        self.ranked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranked.is_empty()
    }

    pub fn rank_of(&self, a: usize, b: usize) -> Option<usize> {
        self.ranked
            .iter()
            .position(|&(x, y)| (x, y) == (a, b) || (x, y) == (b, a))
    }

    pub fn label(&self, rank: usize) -> (char, char) {
        let (a, b) = self.ranked[rank];
        (ALPHABET[a], ALPHABET[b])
    }
}

fn argmin_over(support: &[usize], dist: impl Fn(usize) -> f64) -> usize {
    // Supports are kept in alphabet order, so the first minimum wins ties.
    let mut best = support[0];
    let mut best_d = dist(best);
    for &k in &support[1..] {
        let d = dist(k);
        if d < best_d {
            best = k;
            best_d = d;
        }
    }
    best
}

/// Nearest-neighbour pairwise ordering.
///
/// Starting from the closest pair, the traversal repeatedly moves to the
/// nearest unranked partner of either end of the current pair, preferring the
/// row end `i0` on ties. When neither end has an unranked partner left it
/// restarts from the closest remaining pair.
pub fn nnpaao_ordering(table: &DistanceTable) -> PairRank {
    const N: usize = NUM_AMINO_ACIDS;
    let mut dist = [[0f64; N]; N];
    for i in 0..N {
        for j in 0..N {
            dist[i][j] = f64::from(table.get(i, j));
        }
    }
    let mut support: Vec<Vec<usize>> = (0..N).map(|i| (0..N).filter(|&j| j != i).collect()).collect();
    let mut remaining = [[false; N]; N];
    let mut n_remaining = 0;
    for i in 0..N {
        for j in i + 1..N {
            remaining[i][j] = true;
            n_remaining += 1;
        }
    }

    let mut ranked = Vec::with_capacity(NUM_AMINO_PAIRS);
    let mut restarts = Vec::new();
    let mut current: Option<(usize, usize)> = None;

    while n_remaining > 0 {
        let (alpha, beta): (&[usize], &[usize]) = match current {
            Some((i0, i1)) => (&support[i0], &support[i1]),
            None => (&[], &[]),
        };
        let next = match (current, alpha.is_empty(), beta.is_empty()) {
            (Some((i0, i1)), false, false) => {
                let row_min = argmin_over(alpha, |k| dist[i0][k]);
                let col_min = argmin_over(beta, |k| dist[k][i1]);
                if dist[i0][row_min] <= dist[col_min][i1] {
                    (i0, row_min)
                } else {
                    (col_min, i1)
                }
            }
            (Some((_, i1)), true, false) => (argmin_over(beta, |k| dist[k][i1]), i1),
            (Some((i0, _)), false, true) => (i0, argmin_over(alpha, |k| dist[i0][k])),
            _ => {
                restarts.push(ranked.len());
                let mut best: Option<(usize, usize)> = None;
                for i in 0..N {
                    for j in i + 1..N {
                        if !remaining[i][j] || !(dist[i][j] > 0.0) {
                            continue;
                        }
                        if best.is_none_or(|(a, b)| dist[i][j] < dist[a][b]) {
                            best = Some((i, j));
                        }
                    }
                }
                best.expect("a remaining pair with finite positive distance")
            }
        };

        let (i0, i1) = next;
        let (lo, hi) = if i0 < i1 { (i0, i1) } else { (i1, i0) };
        assert!(remaining[lo][hi], "traversal revisited pair ({i0}, {i1})");
        ranked.push((i0, i1));
        dist[i0][i1] = f64::INFINITY;
        dist[i1][i0] = f64::INFINITY;
        support[i0].retain(|&k| k != i1);
        support[i1].retain(|&k| k != i0);
        remaining[lo][hi] = false;
        n_remaining -= 1;
        current = Some((i0, i1));
    }

    PairRank { ranked, restarts }
}

/// Pair ordering with `eta({x, y}) = rank + 1`.
pub fn eta_from_rank(ranks: &PairRank) -> Result<PairOrdering> {
    PairOrdering::from_ranked_pairs(NUM_AMINO_ACIDS, &ranks.ranked)
}

/// The NNPAAO ordering over the Grantham table.
pub fn default_amino_ordering() -> PairOrdering {
    eta_from_rank(&nnpaao_ordering(&DistanceTable::grantham())).expect("complete ranking")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx(c: char) -> usize {
        aa_index(c).unwrap()
    }

    #[test]
    fn table_spot_values() {
        assert_eq!(grantham_distance("I", "L").unwrap(), 5);
        assert_eq!(grantham_distance("Y", "Y").unwrap(), 0);
        assert_eq!(grantham_distance("C", "W").unwrap(), 215);
        assert_eq!(grantham_distance("w", "c").unwrap(), 215);
        assert!(grantham_distance("B", "A").is_err());
        assert!(grantham_distance("AL", "A").is_err());
    }

    #[test]
    fn table_is_symmetric_with_zero_diagonal() {
        assert!(DistanceTable::new(GRANTHAM).is_ok());
        let mut bad = GRANTHAM;
        bad[0][1] = 1;
        assert!(DistanceTable::new(bad).is_err());
    }

    #[test]
    fn worked_prefix() {
        let r = nnpaao_ordering(&DistanceTable::grantham());
        let unordered = |k: usize| {
            let (a, b) = r.ranked[k];
            if a < b { (a, b) } else { (b, a) }
        };
        let sorted = |a: char, b: char| {
            let (x, y) = (idx(a), idx(b));
            if x < y { (x, y) } else { (y, x) }
        };
        assert_eq!(unordered(0), sorted('I', 'L'));
        assert_eq!(unordered(1), sorted('I', 'M'));
        assert_eq!(unordered(2), sorted('M', 'L'));
    }

    #[test]
    fn ranking_is_a_bijection() {
        let r = nnpaao_ordering(&DistanceTable::grantham());
        assert_eq!(r.len(), NUM_AMINO_PAIRS);
        let ordering = eta_from_rank(&r).unwrap();
        assert_eq!(ordering.eta(idx('I'), idx('L')), 1);
        assert_eq!(ordering.eta(idx('L'), idx('I')), 1);
        let mut seen = vec![false; NUM_AMINO_PAIRS];
        for i in 0..20 {
            for j in i + 1..20 {
                let e = ordering.eta(i, j);
                assert!(!seen[e - 1]);
                seen[e - 1] = true;
            }
        }
    }

    #[test]
    fn consecutive_ranks_share_an_amino_acid_except_at_restarts() {
        let r = nnpaao_ordering(&DistanceTable::grantham());
        assert_eq!(r.restarts[0], 0);
        for k in 1..r.len() {
            if r.restarts.contains(&k) {
                continue;
            }
            let (a, b) = r.ranked[k - 1];
            let (c, d) = r.ranked[k];
            let shared = [c, d].iter().filter(|x| **x == a || **x == b).count();
            assert_eq!(shared, 1, "ranks {} and {}", k - 1, k);
        }
    }

    #[test]
    fn deterministic() {
        let t = DistanceTable::grantham();
        assert_eq!(nnpaao_ordering(&t), nnpaao_ordering(&t));
    }

    #[test]
    fn eta_rejects_incomplete_ranking() {
        let mut r = nnpaao_ordering(&DistanceTable::grantham());
        r.ranked.pop();
        assert!(eta_from_rank(&r).is_err());
    }
}
