use proptest::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use youngheat::formats::{read_lattice_table, write_lattice_table, PathContainer};
use youngheat_core::expansion::{build_lattice, LatticeKind};
use youngheat_core::math::fft;
use youngheat_core::{GridPath, HurstParam};

fn container(m: usize, d: usize, n: usize, seed: u64) -> PathContainer {
    let paths = (0..m)
        .map(|i| {
            GridPath::from_fn(d, n, |t, o| {
                o.iter_mut().enumerate().for_each(|(k, v)| *v = (t * (i + k + 1) as f64).sin() / 3.0)
            })
        })
        .collect();
    PathContainer { hurst: 0.7, seed, series: "state".into(), paths }
}

#[test]
fn fft_agrees_with_rustfft() {
    let mut planner = FftPlanner::<f64>::new();
    for n in [1usize, 2, 8, 64, 1024] {
        let input: Vec<Complex<f64>> =
            (0..n).map(|j| Complex::new((j as f64 * 0.37).sin(), (j as f64 * 1.3).cos() - 0.2)).collect();
        let mut ours = input.clone();
        fft(&mut ours);
        let mut theirs = input;
        planner.plan_fft_forward(n).process(&mut theirs);
        let err = ours.iter().zip(&theirs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10 * n as f64, "n = {n}: {err}");
    }
}

#[test]
fn corrupt_containers_are_rejected() {
    let mut bytes = Vec::new();
    container(2, 1, 8, 1).write_binary(&mut bytes).unwrap();
    assert!(PathContainer::read_binary(&bytes[..]).is_ok());

    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(PathContainer::read_binary(&bad[..]).unwrap_err().contains("magic"));
    assert!(PathContainer::read_binary(&bytes[..bytes.len() - 3]).is_err());
    let mut long = bytes.clone();
    long.push(0);
    assert!(PathContainer::read_binary(&long[..]).is_err());
    let mut version = bytes;
    version[4] = 9;
    assert!(PathContainer::read_binary(&version[..]).is_err());
}

#[test]
fn lattice_table_round_trip() {
    let h = HurstParam::new(0.6).unwrap();
    let lats: Vec<_> = LatticeKind::ALL.iter().map(|&k| build_lattice(k, h, 4.0).unwrap()).collect();
    let mut buf = Vec::new();
    write_lattice_table(&mut buf, &lats).unwrap();
    let rows = read_lattice_table(&buf[..]).unwrap();
    assert_eq!(rows.len(), lats.iter().map(|l| l.len()).sum::<usize>());
    let mut it = rows.iter();
    for lat in &lats {
        for e in &lat.elements {
            let (kind, p, q, v) = it.next().unwrap();
            assert_eq!((kind.as_str(), *p, *q, *v), (lat.kind.name(), e.p, e.q, e.value));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn containers_round_trip(m in 1usize..4, d in 1usize..3, n in 1usize..20, seed in any::<u64>()) {
        let c = container(m, d, n, seed);
        let mut bin = Vec::new();
        c.write_binary(&mut bin).unwrap();
        prop_assert_eq!(&PathContainer::read_binary(&bin[..]).unwrap(), &c);
        let mut csv = Vec::new();
        c.write_csv(&mut csv, false).unwrap();
        prop_assert_eq!(&PathContainer::read_csv(&csv[..], c.hurst, seed, "state").unwrap(), &c);
    }
}
