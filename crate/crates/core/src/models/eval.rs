//! Arithmetic for script templates: numbers, variables (dotted paths
//! allowed), `+ - * /`, parentheses and `ceil floor round abs min max`.

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("unexpected {found} at offset {at}")]
    Unexpected { found: String, at: usize },
    #[error("unknown variable {0}")]
    UnknownVariable(String),
    #[error("unknown function {0}")]
    UnknownFunction(String),
    #[error("{name} takes {expected} argument(s), got {got}")]
    Arity { name: String, expected: &'static str, got: usize },
    #[error("result is not a finite number")]
    NotFinite,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, EvalError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let n = text.parse().map_err(|_| EvalError::Unexpected {
                found: text.to_string(),
                at: start,
            })?;
            out.push((start, Tok::Num(n)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'.') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
        } else if "+-*/(),".contains(c) {
            out.push((i, Tok::Op(c)));
            i += 1;
        } else {
            return Err(EvalError::Unexpected {
                found: c.to_string(),
                at: i,
            });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    vars: &'a dyn Fn(&str) -> Option<f64>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn unexpected(&self) -> EvalError {
        match self.toks.get(self.pos) {
            Some((at, t)) => EvalError::Unexpected {
                found: format!("{t:?}"),
                at: *at,
            },
            None => EvalError::Unexpected {
                found: "end of input".into(),
                at: self.end,
            },
        }
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Tok::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<f64, EvalError> {
        let mut acc = self.term()?;
        loop {
            if self.eat('+') {
                acc += self.term()?;
            } else if self.eat('-') {
                acc -= self.term()?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<f64, EvalError> {
        let mut acc = self.unary()?;
        loop {
            if self.eat('*') {
                acc *= self.unary()?;
            } else if self.eat('/') {
                acc /= self.unary()?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<f64, EvalError> {
        if self.eat('-') {
            return Ok(-self.unary()?);
        }
        if self.eat('+') {
            return self.unary();
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<f64, EvalError> {
        match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.pos += 1;
                Ok(n)
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let v = self.expr()?;
                if !self.eat(')') {
                    return Err(self.unexpected());
                }
                Ok(v)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if self.eat('(') {
                    let mut args = Vec::new();
                    if !self.eat(')') {
                        loop {
                            args.push(self.expr()?);
                            if self.eat(')') {
                                break;
                            }
                            if !self.eat(',') {
                                return Err(self.unexpected());
                            }
                        }
                    }
                    call(&name, &args)
                } else {
                    (self.vars)(&name).ok_or(EvalError::UnknownVariable(name))
                }
            }
            _ => Err(self.unexpected()),
        }
    }
}

fn call(name: &str, args: &[f64]) -> Result<f64, EvalError> {
    let one = |f: fn(f64) -> f64| match args {
        [x] => Ok(f(*x)),
        _ => Err(EvalError::Arity {
            name: name.to_string(),
            expected: "1",
            got: args.len(),
        }),
    };
    let many = |f: fn(f64, f64) -> f64| match args {
        [first, rest @ ..] => Ok(rest.iter().fold(*first, |a, b| f(a, *b))),
        [] => Err(EvalError::Arity {
            name: name.to_string(),
            expected: "1 or more",
            got: 0,
        }),
    };
    match name {
        "ceil" => one(f64::ceil),
        "floor" => one(f64::floor),
        "round" => one(f64::round),
        "abs" => one(f64::abs),
        "min" => many(f64::min),
        "max" => many(f64::max),
        _ => Err(EvalError::UnknownFunction(name.to_string())),
    }
}

/// Evaluate `src`, resolving identifiers through `vars`.
pub fn eval(src: &str, vars: &dyn Fn(&str) -> Option<f64>) -> Result<f64, EvalError> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: src.len(),
        vars,
    };
    let v = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(p.unexpected());
    }
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NotFinite)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_vars(_: &str) -> Option<f64> {
        None
    }

    #[test]
    fn precedence_and_functions() {
        assert_eq!(eval("1 + 2 * 3", &no_vars).unwrap(), 7.0);
        assert_eq!(eval("(1 + 2) * 3", &no_vars).unwrap(), 9.0);
        assert_eq!(eval("-2 - -3", &no_vars).unwrap(), 1.0);
        assert_eq!(eval("ceil(360 / 100)", &no_vars).unwrap(), 4.0);
        assert_eq!(eval("max(1, 5, 3) + min(2)", &no_vars).unwrap(), 7.0);
        assert_eq!(eval("1.5e2", &no_vars).unwrap(), 150.0);
    }

    #[test]
    fn variables_with_paths() {
        let vars = |n: &str| match n {
            "fov" => Some(120.0),
            "result.obstacle_distance_m" => Some(4.0),
            _ => None,
        };
        assert_eq!(eval("360 / ceil(360 / fov)", &vars).unwrap(), 120.0);
        assert_eq!(eval("result.obstacle_distance_m", &vars).unwrap(), 4.0);
        assert_eq!(eval("nope", &vars), Err(EvalError::UnknownVariable("nope".into())));
    }

    #[test]
    fn errors() {
        assert!(matches!(eval("1 +", &no_vars), Err(EvalError::Unexpected { .. })));
        assert!(matches!(eval("1 2", &no_vars), Err(EvalError::Unexpected { .. })));
        assert_eq!(eval("1 / 0", &no_vars), Err(EvalError::NotFinite));
        assert!(matches!(eval("sqrt(4)", &no_vars), Err(EvalError::UnknownFunction(_))));
        assert!(matches!(eval("ceil(1, 2)", &no_vars), Err(EvalError::Arity { .. })));
        assert!(matches!(eval("2 $ 3", &no_vars), Err(EvalError::Unexpected { .. })));
    }
}
