use loopwatt_core::emit_source;
use loopwatt_core::ir::{ScalarType, Stmt};
use loopwatt_core::kernelgen::*;
use loopwatt_core::oracle::{check_equivalence, Verdict};
use num_rational::Ratio;
use proptest::prelude::*;

#[test]
fn exec_time_examples() {
    assert_eq!(expected_exec_time(10, 100, 20, 4).unwrap(), Ratio::from_integer(2500));
    assert_eq!(expected_exec_time(1, 1, 7, 1).unwrap(), Ratio::new(7, 2));
}

#[test]
fn inactivity_iteration_examples() {
    assert_eq!(inactivity_iterations(10).unwrap(), 100_000);
    assert_eq!(inactivity_iterations(100).unwrap(), 10_000);
    assert_eq!(inactivity_iterations(1_000_000).unwrap(), 1);
}

#[test]
fn interchanged_matmul_is_exactly_equal() {
    for n in 1..=6 {
        let naive = KernelSpec::MatmulNaive { n, element: ScalarType::Int };
        let reordered = KernelSpec::MatmulReordered { n, element: ScalarType::Int };
        let inputs = kernel_inputs::<f64>(&naive, n as u64, 4).unwrap();
        let r = check_equivalence(&generate(&naive).unwrap(), &generate(&reordered).unwrap(), &inputs, 0.0).unwrap();
        assert_eq!(r.verdict, Verdict::ExactEqual, "N = {n}");
    }
}

#[test]
fn stencil_shape() {
    let p = generate(&KernelSpec::Stencil2D { n: 4 }).unwrap();
    let text = emit_source(&p);
    assert!(text.contains("for (int i = 1; i < N - 1; i++)"));
    assert!(text.contains("for (int j = 1; j < N - 1; j++)"));
    assert!(text.contains(") / 9.0;"));
}

#[test]
fn dependent_sum_is_strict() {
    let p = generate(&KernelSpec::UnrollMicro { program: MicroProgram::SimpleCompDepend, len: 5 }).unwrap();
    assert!(emit_source(&p).contains("sum = sum + i;"));
}

#[test]
fn matmul_statement_form() {
    let p = generate(&KernelSpec::MatmulNaive { n: 2, element: ScalarType::Int }).unwrap();
    assert!(emit_source(&p).contains("C[row * N + col] += A[row * N + k] * B[k * N + col];"));
    assert!(matches!(&p.body[0], Stmt::Loop(_)));
}

#[test]
fn runtime_kernels_are_deterministic() {
    let spec = KernelSpec::ParConstructs {
        iterations: 3,
        num_tasks: 5,
        max_task_size_us: 200,
        num_threads: 4,
        construct: Construct::MultiTaskGen,
        seed: 99,
    };
    let a = emit_runtime_kernel(&spec).unwrap();
    assert_eq!(a, emit_runtime_kernel(&spec).unwrap());
    assert!(a.contains(&spec.to_string()));
    assert!(a.contains("#define SEED 99ULL"));
}

proptest! {
    #[test]
    fn doubling_threads_halves_time(i in 1u64..1000, t in 1u64..1000, s in 1u64..1000, p in 1u64..64) {
        let one = expected_exec_time(i, t, s, p).unwrap();
        let two = expected_exec_time(i, t, s, 2 * p).unwrap();
        prop_assert_eq!(one, two * Ratio::from_integer(2));
    }

    #[test]
    fn single_task_takes_half_its_size(s in 1u64..1_000_000) {
        prop_assert_eq!(expected_exec_time(1, 1, s, 1).unwrap(), Ratio::new(u128::from(s), 2));
    }
}
