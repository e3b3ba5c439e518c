use loopwatt_core::ir::*;
use loopwatt_core::kernelgen::{generate, kernel_inputs, KernelSpec, MicroProgram};
use loopwatt_core::oracle::{check_equivalence, same_multiset, trace, Verdict};
use loopwatt_core::transforms::{apply_directives, apply_request, tile, FreshNamer, TransformError, TransformRequest};
use loopwatt_core::{parse_program, validate, Store};
use proptest::prelude::*;

/// `A[i0*64 + i1*8 + i2] += 1` under loops with the given constant extents.
fn counting_nest(extents: &[i64]) -> Program {
    let names = ["i0", "i1", "i2"];
    let mut subscript = int(0);
    for (k, name) in names.iter().enumerate().take(extents.len()) {
        subscript = subscript + var(*name) * int(8i64.pow(2 - k as u32));
    }
    let mut body = vec![compound(elem("A", subscript), BinOp::Add, int(1))];
    for (k, &e) in extents.iter().enumerate().rev() {
        body = vec![Stmt::Loop(Loop::new(names[k], int(0), int(e), body))];
    }
    Program::new("nest", vec![Param::int_array("A", int(512))], body)
}

fn zeros() -> Store {
    Store::new().with_int_array("A", vec![0; 512])
}

fn fill_loop() -> Program {
    parse_program("void k(int N, int n[N]) {\n  for (int i = 0; i < N; i++) {\n    n[i] = 10 * i;\n  }\n}\n").unwrap()
}

fn fill_inputs(n: i64) -> Vec<Store> {
    vec![Store::new().with_int("N", n).with_int_array("n", vec![-1; n as usize])]
}

fn at(site: usize, directive: Directive) -> TransformRequest {
    TransformRequest { target: LoopSite(site), directive }
}

proptest! {
    #[test]
    fn tiling_permutes_the_trace(
        extents in prop::collection::vec(0i64..=8, 1..=3),
        sizes in prop::collection::vec(1i64..=5, 3),
    ) {
        let p = counting_nest(&extents);
        let q = apply_request(&p, &at(0, Directive::tile(sizes[..extents.len()].to_vec()))).unwrap();
        let (a, b) = (trace(&p, &zeros()).unwrap(), trace(&q, &zeros()).unwrap());
        prop_assert!(same_multiset(&a, &b));
        let r = check_equivalence(&p, &q, &[zeros()], 0.0).unwrap();
        prop_assert_eq!(r.verdict, Verdict::ExactEqual);
    }

    #[test]
    fn checked_unroll_splits_iterations(t in 0i64..=32, f in 1i64..=8) {
        let q = apply_request(&fill_loop(), &at(0, Directive::unroll_partial(f))).unwrap();
        let points = trace(&q, &fill_inputs(t)[0]).unwrap();
        let main = points.iter().filter(|p| p.site == Some(LoopSite(0))).count() as i64;
        let rest = points.iter().filter(|p| p.site == Some(LoopSite(1))).count() as i64;
        prop_assert_eq!((main, rest), (f * (t / f), t % f));
        let r = check_equivalence(&fill_loop(), &q, &fill_inputs(t), 0.0).unwrap();
        prop_assert_eq!(r.verdict, Verdict::ExactEqual);
    }

    #[test]
    fn nocheck_matches_checked_when_divisible(k in 0i64..=4, f in 1i64..=8) {
        let t = k * f;
        let checked = apply_request(&fill_loop(), &at(0, Directive::unroll_partial(f))).unwrap();
        let nocheck = apply_request(&fill_loop(), &at(0, Directive::unroll_partial(f).nocheck())).unwrap();
        let r = check_equivalence(&checked, &nocheck, &fill_inputs(t), 0.0).unwrap();
        prop_assert_eq!(r.verdict, Verdict::ExactEqual);
    }

    #[test]
    fn full_unroll_preserves_results(lo in 0i64..=8, hi in 0i64..=8) {
        let body = vec![compound(elem("A", var("i")), BinOp::Add, var("i") * int(3) + int(1))];
        let p = Program::new("full", vec![Param::int_array("A", int(512))], vec![Stmt::Loop(Loop::new("i", int(lo), int(hi), body))]);
        let q = apply_request(&p, &at(0, Directive::unroll_full())).unwrap();
        prop_assert!(q.loops().is_empty());
        let r = check_equivalence(&p, &q, &[zeros()], 0.0).unwrap();
        prop_assert_eq!(r.verdict, Verdict::ExactEqual);
    }

    #[test]
    fn jam_preserves_results(len in 1i64..=8, f in 2i64..=4) {
        let spec = KernelSpec::UnrollMicro { program: MicroProgram::ComplexNested, len };
        let p = generate(&spec).unwrap();
        let Stmt::Loop(outer) = &p.body[0] else { unreachable!() };
        let q = Program { body: loopwatt_core::transforms::jam(outer, f).unwrap(), ..p.clone() };
        prop_assert!(validate(&q).is_ok());
        let inputs = kernel_inputs::<f64>(&spec, 3, 2).unwrap();
        let r = check_equivalence(&p, &q, &inputs, 0.0).unwrap();
        prop_assert_eq!(r.verdict, Verdict::ExactEqual);
    }
}

#[test]
fn unit_tiles_keep_the_trace_order() {
    let p = counting_nest(&[3, 4, 2]);
    let q = apply_request(&p, &at(0, Directive::tile(vec![1, 1, 1]))).unwrap();
    let key = |t: Vec<loopwatt_core::oracle::TracePoint>| t.into_iter().map(|p| p.instance).collect::<Vec<_>>();
    assert_eq!(key(trace(&p, &zeros()).unwrap()), key(trace(&q, &zeros()).unwrap()));
}

#[test]
fn nocheck_tiling_matches_original_on_dividing_sizes() {
    let spec = KernelSpec::MatmulNaive { n: 4, element: ScalarType::Int };
    let p = generate(&spec).unwrap();
    let q = apply_request(&p, &at(0, Directive::tile(vec![2, 2, 2]).nocheck())).unwrap();
    let inputs = kernel_inputs::<f64>(&spec, 5, 3).unwrap();
    let r = check_equivalence(&p, &q, &inputs, 0.0).unwrap();
    assert_eq!(r.verdict, Verdict::ExactEqual);
    assert!(r.traces_equal);
}

#[test]
fn pragma_tiling_equals_direct_call() {
    let text = "void mm(int N, int A[N * N], int B[N * N], int C[N * N]) {\n\
                #pragma omp tile sizes(8, 8, 8)\n\
                for (int row = 0; row < N; row++)\n\
                for (int col = 0; col < N; col++)\n\
                for (int k = 0; k < N; k++)\n\
                C[row * N + col] += A[row * N + k] * B[k * N + col];\n}";
    let p = parse_program(text).unwrap();
    let out = apply_directives(&p).unwrap();
    let Stmt::Loop(nest) = &p.body[0] else { unreachable!() };
    let direct = tile(nest, &[8, 8, 8], false, &mut FreshNamer::for_program(&p)).unwrap();
    assert_eq!(out.body, vec![Stmt::Loop(direct)]);
}

#[test]
fn integer_series_survives_reduction_unroll() {
    let p = parse_program("int sum = 0;\nfor (int i = 0; i < 100; i++) sum += i;").unwrap();
    let q = apply_request(&p, &at(0, Directive::unroll_partial(8).with_reduction("sum", ReductionOp::Add))).unwrap();
    for prog in [&p, &q] {
        let out = loopwatt_core::oracle::interpret(prog, &Store::new(), Default::default()).unwrap();
        assert_eq!(out.int("sum"), Some(4950));
    }
}

#[test]
fn float_reduction_stays_within_tolerance() {
    let spec = KernelSpec::UnrollMicro { program: MicroProgram::SimpleComp, len: 10_000 };
    let p = generate(&spec).unwrap();
    let q = apply_request(&p, &at(0, Directive::unroll_partial(8).with_reduction("sum", ReductionOp::Add))).unwrap();
    let r = check_equivalence(&p, &q, &kernel_inputs::<f64>(&spec, 1, 1).unwrap(), 1e-6).unwrap();
    assert!(r.verdict >= Verdict::EqualWithin, "{r}");
}

#[test]
fn nocheck_refuses_provable_breach() {
    let p = parse_program("int A[10];\nfor (int i = 0; i < 10; i++) A[i] = i;").unwrap();
    let err = apply_request(&p, &at(0, Directive::unroll_partial(4).nocheck())).unwrap_err();
    let TransformError::AtSite { source, .. } = err else { panic!("{err:?}") };
    assert!(matches!(*source, TransformError::NocheckBreach { trip: 10, divisor: 4, .. }));
}

#[test]
fn generated_names_do_not_capture() {
    // `r0` and `rmax` are already taken, so the tiler must pick other names.
    let text = "int N; int A[N]; int r0 = 1; int rmax = 2;\n\
                #pragma omp tile sizes(3)\n\
                for (int row = 0; row < N; row++) A[row] = r0 + rmax;";
    let p = parse_program(text).unwrap();
    let q = apply_directives(&p).unwrap();
    let Stmt::Loop(t) = &q.body[2] else { panic!() };
    assert_eq!(t.index, "r0_1");
    let inputs = vec![Store::new().with_int("N", 7).with_int_array("A", vec![0; 7])];
    assert_eq!(check_equivalence(&p, &q, &inputs, 0.0).unwrap().verdict, Verdict::ExactEqual);
}
