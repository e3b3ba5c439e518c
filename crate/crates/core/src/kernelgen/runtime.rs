use std::fmt::Write;

use super::{generate, inactivity_iterations, KernelError, KernelSpec};
use crate::frontend::emit_source;

const PRELUDE: &str = r#"#include <stdint.h>
#include <stdio.h>
#include <stdlib.h>
#include <sys/time.h>
"#;

const STALL: &str = r#"
void stall_us(double us) {
  struct timeval t0;
  gettimeofday(&t0, 0);
  struct timeval t1;
  double elapsed;
  do {
    gettimeofday(&t1, 0);
    elapsed = ((t1.tv_sec - t0.tv_sec) * 1000000 + t1.tv_usec - t0.tv_usec);
  } while (elapsed < us);
}
"#;

const LCG: &str = r#"
static uint64_t lcg_state = SEED;

/* 31 uniformly distributed bits per call. */
static uint64_t lcg_next(void) {
  lcg_state = lcg_state * 6364136223846793005ULL + 1442695040888963407ULL;
  return lcg_state >> 33;
}

/* Uniform in [0, max]. */
static double lcg_uniform(double max) {
  return max * (double)lcg_next() / (double)((1ULL << 31) - 1);
}
"#;

const MEASURE: &str = r#"
#define MAX_DOMAINS 64

typedef struct {
  int n;
  unsigned long long energy_uj[MAX_DOMAINS];
  unsigned long long max_uj[MAX_DOMAINS];
  struct timeval t;
} measurements_t;

static const char *powercap_root(void) {
  const char *root = getenv("LOOPWATT_POWERCAP_ROOT");
  return root ? root : "/sys/class/powercap";
}

static int read_u64(const char *path, unsigned long long *out) {
  FILE *f = fopen(path, "r");
  if (!f) return -1;
  int ok = fscanf(f, "%llu", out) == 1;
  fclose(f);
  return ok ? 0 : -1;
}

static void read_counters(measurements_t *m) {
  char path[4096];
  m->n = 0;
  for (int k = 0; k < MAX_DOMAINS; k++) {
    snprintf(path, sizeof path, "%s/intel-rapl:%d/energy_uj", powercap_root(), k);
    if (read_u64(path, &m->energy_uj[m->n]) != 0) break;
    snprintf(path, sizeof path, "%s/intel-rapl:%d/max_energy_range_uj", powercap_root(), k);
    if (read_u64(path, &m->max_uj[m->n]) != 0) break;
    m->n++;
  }
}

measurements_t *poll_before(void) {
  measurements_t *m = malloc(sizeof *m);
  read_counters(m);
  gettimeofday(&m->t, 0);
  return m;
}

/* Reads the counters again, corrects single wraparounds, sums the domains
   and prints one JSON line (also written to `path` when given). */
void poll_after(measurements_t *m, const char *path) {
  struct timeval t1;
  gettimeofday(&t1, 0);
  measurements_t after;
  read_counters(&after);
  double t_s = (t1.tv_sec - m->t.tv_sec) + (t1.tv_usec - m->t.tv_usec) / 1e6;
  unsigned long long e_uj = 0;
  int n = after.n < m->n ? after.n : m->n;
  for (int k = 0; k < n; k++) {
    unsigned long long b = m->energy_uj[k], a = after.energy_uj[k];
    e_uj += a >= b ? a - b : (m->max_uj[k] - b) + a;
  }
  printf("LOOPWATT_MEASUREMENT {\"t_s\":%.9f,\"e_j\":%.9f}\n", t_s, e_uj / 1e6);
  if (path) {
    FILE *f = fopen(path, "w");
    if (f) {
      fprintf(f, "{\"t_s\":%.9f,\"e_j\":%.9f}\n", t_s, e_uj / 1e6);
      fclose(f);
    }
  }
  free(m);
}
"#;

fn header(spec: &KernelSpec) -> String {
    format!("/* loopwatt runtime kernel\n * spec: {spec}\n */\n")
}

/// A complete C translation unit for a runtime kernel: the benchmark
/// function, the busy-wait, a seeded generator for task sizes and the
/// `poll_before`/`poll_after` measurement hooks around the kernel call.
/// The kernel prints `LOOPWATT_MEASUREMENT {"t_s":..,"e_j":..}` on exit.
pub fn emit_runtime_kernel(spec: &KernelSpec) -> Result<String, KernelError> {
    let program = generate(spec)?;
    let mut out = header(spec);
    out.push_str(PRELUDE);
    match spec {
        KernelSpec::ParConstructs { iterations, num_tasks, max_task_size_us, num_threads, seed, .. } => {
            writeln!(out).unwrap();
            writeln!(out, "#define ITERATIONS {iterations}").unwrap();
            writeln!(out, "#define NUM_TASKS {num_tasks}").unwrap();
            writeln!(out, "#define MAX_TASK_SIZE_US {max_task_size_us}").unwrap();
            writeln!(out, "#define NUM_THREADS {num_threads}").unwrap();
            writeln!(out, "#define SEED {seed}ULL").unwrap();
            out.push_str(STALL);
            out.push_str(LCG);
            out.push_str(MEASURE);
            out.push('\n');
            out.push_str(&emit_source(&program));
            out.push_str(
                r#"
int main(void) {
  float *waittimes = malloc(NUM_TASKS * sizeof *waittimes);
  for (int t = 0; t < NUM_TASKS; t++) {
    waittimes[t] = (float)lcg_uniform(MAX_TASK_SIZE_US);
  }
  measurements_t *m = poll_before();
  par_constructs(ITERATIONS, NUM_TASKS, waittimes);
  poll_after(m, getenv("LOOPWATT_MEASUREMENT_FILE"));
  free(waittimes);
  return 0;
}
"#,
            );
        }
        KernelSpec::Inactivity { waittime_us, num_threads } => {
            let iterations = inactivity_iterations(*waittime_us)?;
            writeln!(out).unwrap();
            writeln!(out, "#define ITERATIONS {iterations}").unwrap();
            writeln!(out, "#define WAITTIME_US {waittime_us}").unwrap();
            writeln!(out, "#define NUM_THREADS {num_threads}").unwrap();
            out.push_str(STALL);
            out.push_str(MEASURE);
            out.push('\n');
            out.push_str(&emit_source(&program));
            out.push_str(
                r#"
int main(void) {
  measurements_t *m = poll_before();
  inactivity(ITERATIONS, WAITTIME_US);
  poll_after(m, getenv("LOOPWATT_MEASUREMENT_FILE"));
  return 0;
}
"#,
            );
        }
        other => return Err(KernelError::NotRuntime(other.kind_name())),
    }
    Ok(out)
}
