//! Delay, efficiency and utility over a deadline grid, written as CSV to stdout.

use mmsp_offload::optimize::{log_space, sweep, write_sweep_csv};
use mmsp_offload::{Deadline, Preference, SystemParams};

fn main() -> mmsp_offload::Result<()> {
    let p = SystemParams::vehicular(Deadline::Infinite);
    let rows = sweep(&p, Preference::new(0.5)?, &log_space(1e-2, 1e5, 25))?;
    write_sweep_csv(std::io::stdout().lock(), &rows)
}
