//! Built-in NBER business-cycle date sets.

use rebound_core::series::Period;

pub const NAMES: [&str; 4] = [
    "paper-peaks-monthly",
    "paper-troughs-monthly",
    "paper-peaks-quarterly",
    "paper-troughs-quarterly",
];

const PEAKS_MONTHLY: [(i32, u32); 6] = [(1980, 1), (1981, 7), (1990, 7), (2001, 3), (2007, 12), (2020, 2)];
const TROUGHS_MONTHLY: [(i32, u32); 6] = [(1980, 7), (1982, 11), (1991, 3), (2001, 11), (2009, 6), (2020, 4)];
const PEAKS_QUARTERLY: [(i32, u32); 6] = [(1980, 1), (1981, 3), (1990, 3), (2001, 1), (2007, 4), (2019, 4)];
const TROUGHS_QUARTERLY: [(i32, u32); 6] = [(1980, 3), (1982, 4), (1991, 1), (2001, 4), (2009, 2), (2020, 2)];

pub fn builtin(name: &str) -> Option<Vec<Period>> {
    let (list, monthly) = match name {
        "paper-peaks-monthly" => (&PEAKS_MONTHLY, true),
        "paper-troughs-monthly" => (&TROUGHS_MONTHLY, true),
        "paper-peaks-quarterly" => (&PEAKS_QUARTERLY, false),
        "paper-troughs-quarterly" => (&TROUGHS_QUARTERLY, false),
        _ => return None,
    };
    Some(
        list.iter()
            .map(|&(y, s)| {
                if monthly {
                    Period::monthly(y, s).expect("valid month")
                } else {
                    Period::quarterly(y, s).expect("valid quarter")
                }
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_named_set_resolves_in_order() {
        for name in NAMES {
            let set = builtin(name).unwrap();
            assert_eq!(set.len(), 6);
            assert!(set.windows(2).all(|w| w[0] < w[1]));
        }
        assert!(builtin("nber").is_none());
    }

    #[test]
    fn troughs_follow_their_peaks() {
        let peaks = builtin("paper-peaks-monthly").unwrap();
        let troughs = builtin("paper-troughs-monthly").unwrap();
        assert!(peaks.iter().zip(&troughs).all(|(p, t)| p < t));
    }
}
