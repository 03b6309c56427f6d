#![allow(dead_code)]

use matchstat::RankedSample;

/// Calls `f` on every permutation of `1..=n` (Heap's algorithm).
pub fn for_each_permutation(n: usize, mut f: impl FnMut(&[u32])) {
    fn heap(k: usize, a: &mut [u32], f: &mut dyn FnMut(&[u32])) {
        if k <= 1 {
            f(a);
            return;
        }
        for i in 0..k {
            heap(k - 1, a, f);
            let j = if k.is_multiple_of(2) { i } else { 0 };
            a.swap(j, k - 1);
        }
    }
    let mut a: Vec<u32> = (1..=n as u32).collect();
    heap(n, &mut a, &mut f);
}

/// Histogram of `matching_statistic` over all pairings of a fixed `rx`
/// with every permutation `ry`.
pub fn enumerate_matching(n: usize) -> Vec<u64> {
    // A non-identity reference ordering, so the oracle does not lean on rx = 1..n.
    let rx: Vec<u32> = (1..=n as u32).rev().collect();
    let mut hist = vec![0u64; n + 1];
    for_each_permutation(n, |ry| {
        let rs = RankedSample::new(rx.clone(), ry.to_vec()).unwrap();
        hist[matchstat::matching_statistic(&rs)] += 1;
    });
    hist
}

/// Table 1 as printed: rows k = 0..=7, columns n = 4..=7 then Poisson(1).
pub const TABLE1: [[Option<&str>; 5]; 8] = [
    [
        Some(".3750"),
        Some(".3667"),
        Some(".3681"),
        Some(".3679"),
        Some(".3679"),
    ],
    [
        Some(".3333"),
        Some(".3750"),
        Some(".3667"),
        Some(".3681"),
        Some(".3679"),
    ],
    [
        Some(".2500"),
        Some(".1667"),
        Some(".1875"),
        Some(".1833"),
        Some(".1839"),
    ],
    [
        Some(".0000"),
        Some(".0833"),
        Some(".0556"),
        Some(".0625"),
        Some(".0613"),
    ],
    [
        Some(".0417"),
        Some(".0000"),
        Some(".0208"),
        Some(".0139"),
        Some(".0153"),
    ],
    [
        None,
        Some(".0083"),
        Some(".0000"),
        Some(".0042"),
        Some(".0031"),
    ],
    [None, None, Some(".0014"), Some(".0000"), Some(".0005")],
    [None, None, None, Some(".0002"), Some(".0001")],
];

/// `0.xxxx` -> `.xxxx`
pub fn paper_style(v: f64) -> String {
    let s = format!("{v:.4}");
    s.strip_prefix('0').map(str::to_string).unwrap_or(s)
}
