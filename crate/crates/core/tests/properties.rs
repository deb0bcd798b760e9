use nalgebra::{Matrix4, Vector4};
use proptest::prelude::*;

use pendavg::expr::{BinOp, Constant, Func, Var};
use pendavg::model::{
    fundamental_matrix, inverse_modal_transform, linear_part_modal, modal_transform, unperturbed_orbit,
    vector_field_original, ModalState,
};
use pendavg::{EvalEnv, Expr, Mode, State4};

fn state() -> impl Strategy<Value = State4> {
    prop::array::uniform4(-10.0f64..10.0).prop_map(State4::from_array)
}

fn mode() -> impl Strategy<Value = Mode> {
    prop_oneof![Just(Mode::Mode1), Just(Mode::Mode2)]
}

fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0.0f64..100.0).prop_map(Expr::Num),
        prop::sample::select(Var::ALL.to_vec()).prop_map(Expr::Var),
        prop::sample::select(vec![Constant::Pi, Constant::W1, Constant::W2]).prop_map(Expr::Const),
    ];
    leaf.prop_recursive(5, 40, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (prop::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div]), inner.clone(), inner.clone())
                .prop_map(|(op, l, r)| Expr::Binary {
                    op,
                    lhs: Box::new(l),
                    rhs: Box::new(r)
                }),
            (inner.clone(), prop::sample::select(vec![-2.0, 0.5, 1.0, 2.0, 3.0])).prop_map(|(b, exponent)| Expr::Pow {
                base: Box::new(b),
                exponent
            }),
            (prop::sample::select(vec![Func::Sin, Func::Cos, Func::Sqrt, Func::Exp, Func::Abs]), inner)
                .prop_map(|(func, a)| Expr::Call { func, arg: Box::new(a) }),
        ]
    })
}

fn env() -> impl Strategy<Value = EvalEnv> {
    (-5.0f64..5.0, state()).prop_map(|(tau, s)| s.env(tau))
}

/// Two evaluations agree when both fail, or both succeed with equal values
/// (NaN-free by construction).
fn same_eval(a: &Expr, b: &Expr, e: &EvalEnv) -> bool {
    match (a.eval(e), b.eval(e)) {
        (Ok(x), Ok(y)) => x == y || (x - y).abs() <= 1e-12 * x.abs().max(1.0),
        (Err(_), Err(_)) => true,
        _ => false,
    }
}

proptest! {
    #[test]
    fn modal_round_trip(s in state()) {
        let back = inverse_modal_transform(&modal_transform(&s));
        prop_assert!(back.distance(&s) <= 1e-12 * s.to_vector().norm().max(1.0));
    }

    #[test]
    fn display_round_trips(e in expr(), at in env()) {
        let text = e.to_string();
        let reparsed = Expr::parse(&text).unwrap();
        prop_assert_eq!(reparsed.to_string(), text);
        prop_assert!(same_eval(&e, &reparsed, &at));
    }

    #[test]
    fn evaluation_is_pure(e in expr(), at in env()) {
        let first = e.eval(&at);
        let second = e.eval(&at);
        prop_assert_eq!(first, second);
    }

    #[test]
    fn fundamental_matrix_solves_variational_equation(tau in -20.0f64..20.0) {
        let h = 1e-5;
        let d = (fundamental_matrix(tau + h) - fundamental_matrix(tau - h)) / (2.0 * h);
        prop_assert!((d - linear_part_modal() * fundamental_matrix(tau)).amax() <= 1e-8);
        let m = fundamental_matrix(tau);
        prop_assert!((m * m.transpose() - Matrix4::identity()).amax() <= 1e-12);
    }

    #[test]
    fn modal_energies_are_invariant(m in mode(), a in -5.0f64..5.0, b in -5.0f64..5.0, tau in 0.0f64..50.0) {
        let x = modal_transform(&unperturbed_orbit(m, [a, b], tau));
        let x0 = ModalState::embed(m, [a, b]);
        let e = |s: &ModalState| (s.x * s.x + s.y * s.y, s.z * s.z + s.w * s.w);
        let ((e1, e2), (f1, f2)) = (e(&x), e(&x0));
        prop_assert!((e1 - f1).abs() <= 1e-10 && (e2 - f2).abs() <= 1e-10);
    }

    #[test]
    fn closed_form_orbit_solves_the_ode(m in mode(), a in -3.0f64..3.0, b in -3.0f64..3.0, tau in 0.0f64..10.0) {
        // Central differences have O(h^2) error: halving h quarters it.
        let zero = Expr::zero();
        let field = vector_field_original(tau, &unperturbed_orbit(m, [a, b], tau), &zero, &zero, 0.0)
            .unwrap()
            .to_vector();
        let fd = |h: f64| -> Vector4<f64> {
            (unperturbed_orbit(m, [a, b], tau + h).to_vector() - unperturbed_orbit(m, [a, b], tau - h).to_vector())
                / (2.0 * h)
        };
        let e1 = (fd(1e-2) - field).norm();
        let e2 = (fd(5e-3) - field).norm();
        prop_assert!(e1 <= 1e-3 * (1.0 + a.abs() + b.abs()));
        if e1 > 1e-9 {
            prop_assert!((e1 / e2 - 4.0).abs() < 0.2, "ratio {}", e1 / e2);
        }
    }
}
