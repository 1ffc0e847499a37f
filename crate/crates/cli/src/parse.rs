//! Flag value parsers. Power-like quantities need an explicit unit suffix:
//! `dB` or `lin` (case-insensitive), e.g. `--x -4.5665dB` or `--x 0.35lin`.

fn split_unit(s: &str) -> Result<(&str, bool), String> {
    let t = s.trim();
    let lower = t.to_ascii_lowercase();
    if lower.ends_with("db") {
        Ok((t[..t.len() - 2].trim(), true))
    } else if lower.ends_with("lin") {
        Ok((t[..t.len() - 3].trim(), false))
    } else {
        Err(format!(
            "`{s}` needs a unit suffix: `dB` or `lin` (e.g. -4.5665dB, 0.35lin)"
        ))
    }
}

fn number(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn lin_to_db(v: f64, raw: &str) -> Result<f64, String> {
    if v > 0.0 {
        Ok(10.0 * v.log10())
    } else {
        Err(format!("`{raw}`: a linear value must be positive to express in dB"))
    }
}

/// A power ratio, returned in linear units.
pub fn level_linear(s: &str) -> Result<f64, String> {
    let (num, db) = split_unit(s)?;
    let v = number(num)?;
    if db {
        Ok(10f64.powf(v / 10.0))
    } else if v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("`{s}`: a linear power ratio cannot be negative"))
    }
}

/// A power ratio, returned in dB.
pub fn level_db(s: &str) -> Result<f64, String> {
    let (num, db) = split_unit(s)?;
    let v = number(num)?;
    if db {
        Ok(v)
    } else {
        lin_to_db(v, s)
    }
}

/// Rounds away the representation noise of `a + i·step`.
fn tidy(v: f64) -> f64 {
    let r = (v * 1e9).round() / 1e9;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// SNR grid in dB from `start:step:stop` or a comma list, with one unit suffix
/// for the whole list: `0:2:30dB`, `0,10,20dB`, `1,10,100lin`.
pub fn snr_grid_db(s: &str) -> Result<Vec<f64>, String> {
    let (body, db) = split_unit(s)?;
    let convert = |v: f64| if db { Ok(v) } else { lin_to_db(v, s) };
    let values: Vec<f64> = if body.contains(':') {
        let parts: Vec<&str> = body.split(':').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(format!("`{s}`: a range is start:step:stop"));
        }
        let (a, step, b) = (number(parts[0])?, number(parts[1])?, number(parts[2])?);
        if !(step > 0.0) || b < a {
            return Err(format!("`{s}`: need step > 0 and stop >= start"));
        }
        let n = ((b - a) / step + 1e-9).floor() as usize + 1;
        if n > 10_000 {
            return Err(format!("`{s}` expands to {n} points"));
        }
        (0..n).map(|i| tidy(a + step * i as f64)).collect()
    } else {
        body.split(',').map(|p| number(p.trim())).collect::<Result<_, _>>()?
    };
    if values.is_empty() {
        return Err(format!("`{s}` is empty"));
    }
    values.into_iter().map(convert).collect()
}

/// A parsed SNR grid (dB); a newtype so clap treats it as one value.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

pub fn grid(s: &str) -> Result<Grid, String> {
    snr_grid_db(s).map(Grid)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Counts(pub Vec<usize>);

pub fn counts(s: &str) -> Result<Counts, String> {
    usize_list(s).map(Counts)
}

/// Comma-separated positive integers, e.g. `1,2,4`.
pub fn usize_list(s: &str) -> Result<Vec<usize>, String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| format!("`{p}` is not a positive integer"))
        })
        .collect::<Result<_, _>>()?;
    if v.is_empty() || v.contains(&0) {
        return Err(format!("`{s}` must list positive integers"));
    }
    Ok(v)
}
