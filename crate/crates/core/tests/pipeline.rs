use fraclab::constants::FracParams;
use fraclab::eigen::lowest_eigenpairs;
use fraclab::extension::{extend, SlabGrid};
use fraclab::form::StiffnessForm;
use fraclab::grid::{BoxGrid, ThinDomain};

fn lambdas(dom: &ThinDomain, p: &FracParams, m: usize) -> Vec<f64> {
    let form = StiffnessForm::assemble(dom, p).unwrap();
    lowest_eigenpairs(&form, m).unwrap().lambdas().to_vec()
}

#[test]
fn translated_mask_has_the_same_spectrum() {
    let p = FracParams::new(2, 0.4, 1.0).unwrap();
    let g = BoxGrid::new(2, -2.0, 2.0, 24).unwrap();
    let h = g.h();
    let a = ThinDomain::ball(g.clone(), [0.0, 0.0], 0.9);
    let b = ThinDomain::ball(g, [3.0 * h, -2.0 * h], 0.9);
    assert_eq!(a.count(), b.count());
    for (x, y) in lambdas(&a, &p, 3).iter().zip(lambdas(&b, &p, 3)) {
        assert!((x - y).abs() <= 1e-10 * x, "{x} vs {y}");
    }
}

#[test]
fn first_eigenfunction_extension_carries_its_energy() {
    let p = FracParams::new(1, 0.5, 1.0).unwrap();
    let g = BoxGrid::new(1, -2.0, 2.0, 256).unwrap();
    let dom = ThinDomain::interval(g.clone(), -1.0, 1.0);
    let form = StiffnessForm::assemble(&dom, &p).unwrap();
    let bundle = lowest_eigenpairs(&form, 1).unwrap();
    let trace = bundle.full_field(0);
    let seminorm = form.seminorm(&bundle.vectors()[0]).unwrap();
    let slab = SlabGrid::graded(g, 64, 4.0, &p).unwrap();
    let field = extend(&trace, &slab).unwrap();
    let rel = (p.constants().d_s * field.energy() - seminorm).abs() / seminorm;
    // the truncated slab costs a few percent at this width
    assert!(rel < 0.1, "relative energy gap {rel}");
    assert!((seminorm - bundle.lambdas()[0]).abs() < 1e-8 * seminorm);
}
