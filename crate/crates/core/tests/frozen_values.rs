//! Frozen spot values for the 8 dB family, computed once from the Fock
//! oracle at truncation 180 (tails < 1e-30) and, where available, checked
//! against closed forms. These pin the analytic path against silent
//! regressions without rebuilding the oracle on every run.

use num_complex::Complex64;

use cv_teleport::gaussian_states::{tmsv, SqueezingParam};
use cv_teleport::hermite::PrecisionPolicy;
use cv_teleport::pv_ops::{
    GeneralizedPVSpec, GeneralizedPvState, ModeOp, PVSpec, PhotonVariedState,
};
use cv_teleport::teleport::{fidelity, InputState, QuadratureGrid, ResourceCF};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn pv(spec: PVSpec) -> PhotonVariedState {
    PhotonVariedState::new(
        tmsv(SqueezingParam::from_db(8.0).unwrap()),
        spec,
        PrecisionPolicy::machine(),
    )
    .unwrap()
}

#[test]
fn frozen_response_ratios() {
    let sub1 = pv(PVSpec::symmetric(-1, 1).unwrap());
    assert!((sub1.response_ratio(c(1.0, 0.0)).unwrap() - 1.04991560113134619).abs() < 1e-9);
    assert!((sub1.norm() - 3.61246379894609859).abs() < 1e-9);

    let add2 = pv(PVSpec::symmetric(1, 2).unwrap());
    assert!((add2.response_ratio(c(2.0, 0.0)).unwrap() - 1.02340805976053684).abs() < 1e-9);

    let mixed = pv(PVSpec::new(vec![ModeOp::subtract(1), ModeOp::add(1)]).unwrap());
    assert!((mixed.response_ratio(c(1.5, 0.0)).unwrap() - 0.35038018869008658).abs() < 1e-9);

    let gen = GeneralizedPvState::new(
        tmsv(SqueezingParam::from_db(8.0).unwrap()),
        GeneralizedPVSpec::new(vec![0.8, 0.5, 0.3], true).unwrap(),
        PrecisionPolicy::machine(),
    )
    .unwrap();
    assert!((gen.response_ratio(c(1.0, 0.0)).unwrap() - 1.02824049945259177).abs() < 1e-9);
}

#[test]
fn frozen_cf_value() {
    let sub1 = pv(PVSpec::symmetric(-1, 1).unwrap());
    let xi = c(0.7, 0.3);
    let value = sub1.cf(&[xi, xi.conj()]).unwrap();
    assert!((value.re - 0.936655225500110378).abs() < 1e-9);
    assert!(value.im.abs() < 1e-12);
}

#[test]
fn frozen_fidelity() {
    let res = ResourceCF::PhotonVaried(pv(PVSpec::symmetric(-1, 1).unwrap()));
    let f = fidelity(
        &res,
        &InputState::Coherent(c(0.4, -0.2)),
        &QuadratureGrid::default(),
    )
    .unwrap();
    assert!((f - 0.905081023857150169).abs() < 1e-8, "{f}");
}
