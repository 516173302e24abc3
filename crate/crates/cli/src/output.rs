use std::io::Write;

use serde::Serialize;

use crate::error::CliResult;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn json<T: Serialize>(value: &T) -> CliResult<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value).map_err(std::io::Error::from)?;
    writeln!(out)?;
    Ok(())
}

pub fn csv<T: Serialize>(rows: &[T]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(std::io::stdout().lock());
    for row in rows {
        w.serialize(row).map_err(std::io::Error::from)?;
    }
    w.flush()?;
    Ok(())
}

pub fn text(body: &str) -> CliResult<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(body.as_bytes())?;
    Ok(())
}
