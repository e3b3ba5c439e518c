//! Benchmark kernels as IR, the C emitter for the OpenMP runtime kernels,
//! and the analytic runtime model of the parallel-constructs benchmark.

mod runtime;

use std::collections::BTreeMap;
use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::{
    assign, cast, compound, decl, elem, float, index, int, omp, scalar, var, BinOp, Loop, Param, Program, ScalarType,
    Stmt,
};
use crate::oracle::{random_inputs, ExecError, InputSpec, Store};
use crate::scalar::Real;

pub use runtime::emit_runtime_kernel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MicroProgram {
    SimpleMem,
    SimpleComp,
    SimpleCompDepend,
    ComplexNested,
}

impl MicroProgram {
    pub const ALL: [MicroProgram; 4] = [
        MicroProgram::SimpleMem,
        MicroProgram::SimpleComp,
        MicroProgram::SimpleCompDepend,
        MicroProgram::ComplexNested,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MicroProgram::SimpleMem => "SIMPLE_MEM",
            MicroProgram::SimpleComp => "SIMPLE_COMP",
            MicroProgram::SimpleCompDepend => "SIMPLE_COMP_DEPEND",
            MicroProgram::ComplexNested => "COMPLEX_NESTED",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name().eq_ignore_ascii_case(s))
    }
}

/// How the parallel-constructs benchmark distributes its tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Construct {
    SingleTaskGen,
    MultiTaskGen,
    Taskloop,
    ParforStatic,
    ParforDynamic,
}

impl Construct {
    pub const ALL: [Construct; 5] = [
        Construct::SingleTaskGen,
        Construct::MultiTaskGen,
        Construct::Taskloop,
        Construct::ParforStatic,
        Construct::ParforDynamic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Construct::SingleTaskGen => "single-task-gen",
            Construct::MultiTaskGen => "multi-task-gen",
            Construct::Taskloop => "taskloop",
            Construct::ParforStatic => "parfor-static",
            Construct::ParforDynamic => "parfor-dynamic",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KernelSpec {
    MatmulNaive {
        n: i64,
        element: ScalarType,
    },
    MatmulReordered {
        n: i64,
        element: ScalarType,
    },
    #[serde(rename = "stencil2d")]
    Stencil2D {
        n: i64,
    },
    ParConstructs {
        iterations: i64,
        num_tasks: i64,
        max_task_size_us: i64,
        num_threads: i64,
        construct: Construct,
        seed: u64,
    },
    Inactivity {
        waittime_us: i64,
        num_threads: i64,
    },
    UnrollMicro {
        program: MicroProgram,
        len: i64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KernelError {
    #[error("invalid kernel spec: {0}")]
    InvalidSpec(String),
    #[error("`{0}` is not a runtime kernel; only par-constructs and inactivity emit C directly")]
    NotRuntime(&'static str),
}

impl KernelSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            KernelSpec::MatmulNaive { .. } => "matmul-naive",
            KernelSpec::MatmulReordered { .. } => "matmul-reordered",
            KernelSpec::Stencil2D { .. } => "stencil2d",
            KernelSpec::ParConstructs { .. } => "par-constructs",
            KernelSpec::Inactivity { .. } => "inactivity",
            KernelSpec::UnrollMicro { .. } => "unroll-micro",
        }
    }

    /// Checks that every size parameter the kind uses is positive. `len`
    /// may also be zero, which gives zero-trip loops.
    pub fn validate(&self) -> Result<(), KernelError> {
        let positive = |name: &str, v: i64| {
            if v >= 1 {
                Ok(())
            } else {
                Err(KernelError::InvalidSpec(format!("{name} must be positive, got {v}")))
            }
        };
        match self {
            KernelSpec::MatmulNaive { n, .. } | KernelSpec::MatmulReordered { n, .. } | KernelSpec::Stencil2D { n } => {
                positive("N", *n)
            }
            KernelSpec::ParConstructs { iterations, num_tasks, max_task_size_us, num_threads, .. } => {
                positive("iterations", *iterations)?;
                positive("num_tasks", *num_tasks)?;
                positive("max_task_size_us", *max_task_size_us)?;
                positive("num_threads", *num_threads)
            }
            KernelSpec::Inactivity { waittime_us, num_threads } => {
                positive("waittime_us", *waittime_us)?;
                positive("num_threads", *num_threads)
            }
            KernelSpec::UnrollMicro { len, .. } if *len < 0 => {
                Err(KernelError::InvalidSpec(format!("len must not be negative, got {len}")))
            }
            KernelSpec::UnrollMicro { .. } => Ok(()),
        }
    }

    /// Values of the generated program's integer parameters.
    pub fn size_params(&self) -> BTreeMap<String, i64> {
        let pairs: Vec<(&str, i64)> = match self {
            KernelSpec::MatmulNaive { n, .. } | KernelSpec::MatmulReordered { n, .. } | KernelSpec::Stencil2D { n } => {
                vec![("N", *n)]
            }
            KernelSpec::ParConstructs { iterations, num_tasks, .. } => {
                vec![("iterations", *iterations), ("num_tasks", *num_tasks)]
            }
            KernelSpec::Inactivity { waittime_us, .. } => {
                vec![("iterations", inactivity_iterations(*waittime_us).unwrap_or(0)), ("waittime_us", *waittime_us)]
            }
            KernelSpec::UnrollMicro { len, .. } => vec![("len", *len)],
        };
        pairs.into_iter().map(|(k, v)| (k.to_owned(), v)).collect()
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serde_json::to_string(self).map_err(|_| fmt::Error)?)
    }
}

fn matmul_stmt() -> Stmt {
    let n = || var("N");
    compound(
        elem("C", var("row") * n() + var("col")),
        BinOp::Add,
        index("A", var("row") * n() + var("k")) * index("B", var("k") * n() + var("col")),
    )
}

fn matmul(name: &str, order: [&str; 3], element: ScalarType) -> Program {
    let nn = var("N") * var("N");
    let array = |a: &str| match element {
        ScalarType::Int => Param::int_array(a, nn.clone()),
        ScalarType::Float => Param::float_array(a, nn.clone()),
    };
    let mut body = vec![matmul_stmt()];
    for idx in order.iter().rev() {
        body = vec![Stmt::Loop(Loop::new(*idx, int(0), var("N"), body))];
    }
    Program::new(name, vec![Param::int("N"), array("A"), array("B"), array("C")], body)
}

fn stencil() -> Program {
    let n = || var("N");
    let at = |di: i64, dj: i64| {
        let row = match di {
            0 => var("i"),
            d if d < 0 => var("i") - int(-d),
            d => var("i") + int(d),
        };
        let col = match dj {
            0 => var("j"),
            d if d < 0 => var("j") - int(-d),
            d => var("j") + int(d),
        };
        index("matrix", row * n() + col)
    };
    let mut terms = Vec::new();
    for di in -1..=1 {
        for dj in -1..=1 {
            terms.push(at(di, dj));
        }
    }
    let sum = terms.into_iter().reduce(|a, b| a + b).expect("nine terms");
    let stmt = assign(elem("matrix", var("i") * n() + var("j")), sum / float(9.0));
    let inner = Loop::new("j", int(1), n() - int(1), vec![stmt]);
    let outer = Loop::new("i", int(1), n() - int(1), vec![Stmt::Loop(inner)]);
    Program::new("stencil2d", vec![Param::int("N"), Param::float_array("matrix", n() * n())], vec![Stmt::Loop(outer)])
}

fn micro(program: MicroProgram) -> Program {
    let len = || var("len");
    let lp = |body| Stmt::Loop(Loop::new("i", int(0), len(), body));
    match program {
        MicroProgram::SimpleMem => Program::new(
            "simple_mem",
            vec![Param::int("len"), Param::int_array("A", len())],
            vec![lp(vec![assign(elem("A", var("i")), var("i"))])],
        ),
        // 1/(float)(i+1): the i = 0 term of 1/(float)i would be infinite.
        MicroProgram::SimpleComp => Program::new(
            "simple_comp",
            vec![Param::int("len")],
            vec![
                decl("sum", ScalarType::Float, float(0.0)),
                lp(vec![compound(scalar("sum"), BinOp::Add, int(1) / cast(ScalarType::Float, var("i") + int(1)))]),
            ],
        ),
        MicroProgram::SimpleCompDepend => Program::new(
            "simple_comp_depend",
            vec![Param::int("len")],
            vec![decl("sum", ScalarType::Int, int(0)), lp(vec![assign(scalar("sum"), var("sum") + var("i"))])],
        ),
        MicroProgram::ComplexNested => {
            let inner =
                Loop::new("j", int(0), len(), vec![compound(elem("A", var("i")), BinOp::Add, var("i") * var("j"))]);
            Program::new(
                "complex_nested",
                vec![Param::int("len"), Param::int_array("A", len())],
                vec![lp(vec![assign(elem("A", var("i")), int(0)), Stmt::Loop(inner)])],
            )
        }
    }
}

fn par_constructs(construct: Construct) -> Program {
    let task_loop = |body: Stmt| Stmt::Loop(Loop::new("t", int(0), var("num_tasks"), vec![body]));
    let stall = || Stmt::Stall(index("waittimes", var("t")));
    let region = match construct {
        Construct::SingleTaskGen => omp("parallel", Stmt::Block(vec![omp("single", task_loop(omp("task", stall())))])),
        Construct::MultiTaskGen => omp("parallel", Stmt::Block(vec![omp("for", task_loop(omp("task", stall())))])),
        Construct::Taskloop => omp("parallel", Stmt::Block(vec![omp("single", omp("taskloop", task_loop(stall())))])),
        // The parallel-for itself is the per-iteration region.
        Construct::ParforStatic => omp("parallel for schedule(static)", task_loop(stall())),
        Construct::ParforDynamic => omp("parallel for schedule(dynamic)", task_loop(stall())),
    };
    Program::new(
        "par_constructs",
        vec![Param::int("iterations"), Param::int("num_tasks"), Param::float_array("waittimes", var("num_tasks"))],
        vec![Stmt::Loop(Loop::new("i", int(0), var("iterations"), vec![region]))],
    )
}

fn inactivity() -> Program {
    let body =
        vec![omp("master", Stmt::Stall(var("waittime_us"))), Stmt::Omp { directive: "barrier".into(), body: None }];
    let lp = Stmt::Loop(Loop::new("i", int(0), var("iterations"), body));
    Program::new(
        "inactivity",
        vec![Param::int("iterations"), Param::int("waittime_us")],
        vec![omp("parallel", Stmt::Block(vec![lp]))],
    )
}

/// Builds the kernel described by `spec`. Sizes stay symbolic parameters;
/// [`KernelSpec::size_params`] gives their values.
pub fn generate(spec: &KernelSpec) -> Result<Program, KernelError> {
    spec.validate()?;
    Ok(match spec {
        KernelSpec::MatmulNaive { element, .. } => matmul("matmul_naive", ["row", "col", "k"], *element),
        KernelSpec::MatmulReordered { element, .. } => matmul("matmul_reordered", ["row", "k", "col"], *element),
        KernelSpec::Stencil2D { .. } => stencil(),
        KernelSpec::ParConstructs { construct, .. } => par_constructs(*construct),
        KernelSpec::Inactivity { .. } => inactivity(),
        KernelSpec::UnrollMicro { program, .. } => micro(*program),
    })
}

/// Random inputs for the generated kernel with its size parameters fixed.
pub fn kernel_inputs<F: Real>(spec: &KernelSpec, seed: u64, count: usize) -> Result<Vec<Store<F>>, ExecError> {
    let program = generate(spec).map_err(|e| ExecError::InvalidProgram(e.to_string()))?;
    let input_spec = InputSpec { fixed: spec.size_params(), seed };
    random_inputs(&program, &input_spec, count)
}

/// `iterations * num_tasks * max_task_size / (2 * num_threads)`
/// microseconds, exactly.
pub fn expected_exec_time(
    iterations: u64,
    num_tasks: u64,
    max_task_size_us: u64,
    num_threads: u64,
) -> Result<Ratio<u128>, KernelError> {
    if [iterations, num_tasks, max_task_size_us, num_threads].contains(&0) {
        return Err(KernelError::InvalidSpec("all runtime-model inputs must be at least 1".into()));
    }
    let work = u128::from(iterations) * u128::from(num_tasks) * u128::from(max_task_size_us);
    Ok(Ratio::new(work, 2 * u128::from(num_threads)))
}

/// Iterations of the inactivity benchmark for a given waiting time:
/// `floor(1_000_000 / waittime_us)`.
pub fn inactivity_iterations(waittime_us: i64) -> Result<i64, KernelError> {
    if waittime_us < 1 {
        return Err(KernelError::InvalidSpec(format!("waittime_us must be positive, got {waittime_us}")));
    }
    Ok(1_000_000 / waittime_us)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validate::{loop_nest_depth, validate};

    #[test]
    fn every_kind_validates() {
        let specs = [
            KernelSpec::MatmulNaive { n: 2, element: ScalarType::Int },
            KernelSpec::MatmulReordered { n: 2, element: ScalarType::Float },
            KernelSpec::Stencil2D { n: 4 },
            KernelSpec::Inactivity { waittime_us: 10, num_threads: 4 },
            KernelSpec::UnrollMicro { program: MicroProgram::ComplexNested, len: 0 },
        ];
        for spec in specs {
            let p = generate(&spec).unwrap();
            assert!(validate(&p).is_ok(), "{spec}: {}", validate(&p));
        }
        for construct in Construct::ALL {
            let spec = KernelSpec::ParConstructs {
                iterations: 2,
                num_tasks: 3,
                max_task_size_us: 20,
                num_threads: 4,
                construct,
                seed: 1,
            };
            assert!(validate(&generate(&spec).unwrap()).is_ok());
        }
    }

    #[test]
    fn matmul_orders() {
        let naive = generate(&KernelSpec::MatmulNaive { n: 2, element: ScalarType::Int }).unwrap();
        let Stmt::Loop(l) = &naive.body[0] else { panic!() };
        assert_eq!(loop_nest_depth(l), 3);
        let reordered = generate(&KernelSpec::MatmulReordered { n: 2, element: ScalarType::Int }).unwrap();
        let order: Vec<String> = reordered.loops().iter().map(|(_, l)| l.index.clone()).collect();
        assert_eq!(order, ["row", "k", "col"]);
    }

    #[test]
    fn bad_specs_are_rejected() {
        assert!(generate(&KernelSpec::Stencil2D { n: 0 }).is_err());
        assert!(generate(&KernelSpec::UnrollMicro { program: MicroProgram::SimpleMem, len: -1 }).is_err());
        assert!(expected_exec_time(1, 1, 1, 0).is_err());
        assert!(inactivity_iterations(0).is_err());
    }

    #[test]
    fn spec_serializes_with_kind_tag() {
        let s = KernelSpec::UnrollMicro { program: MicroProgram::SimpleCompDepend, len: 5 };
        assert_eq!(s.to_string(), r#"{"kind":"unroll-micro","program":"SIMPLE_COMP_DEPEND","len":5}"#);
        let back: KernelSpec = serde_json::from_str(&s.to_string()).unwrap();
        assert_eq!(back, s);
    }
}
