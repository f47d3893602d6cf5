use std::collections::{BTreeMap, HashMap};

use crate::geometry::{
    self, build_reference_frame, classify_cardinal, classify_primary_rotation, dedup_count,
    derive_cardinal_axes, express_in_frame, qualitative_relation, relative_rotation,
    transform_points, Axis, Cardinal, EulerOrder, FrameInputs, FrameTag, GeometryError,
    PointCloud, Rotation, Vec3, VectorKind, ANGLE_EPSILON, DEFAULT_CARDINAL_MARGIN,
};

use super::parser::{BinOp, Builtin, Expr, GeoProgram, Pos, Stmt, UnOp};
use super::value::{Bindings, GeoValue, MAX_DEPTH};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalErrorKind {
    #[error("unbound name `{0}`")]
    Unbound(String),
    #[error("{func}: expected {expected}, found {found}")]
    Type {
        func: String,
        expected: String,
        found: String,
    },
    #[error("{func}: expected {expected} arguments, found {found}")]
    Arity {
        func: &'static str,
        expected: &'static str,
        found: usize,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("{0}")]
    Domain(String),
    #[error("result is not finite")]
    NonFinite,
    #[error("value nesting exceeds {MAX_DEPTH}")]
    TooDeep,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {}: {kind}", pos.line)]
pub struct EvalError {
    pub pos: Pos,
    pub kind: EvalErrorKind,
}

type R<T> = Result<T, EvalErrorKind>;

fn type_err<T>(func: &str, expected: &str, found: &GeoValue) -> R<T> {
    Err(EvalErrorKind::Type {
        func: func.to_string(),
        expected: expected.to_string(),
        found: found.type_name().to_string(),
    })
}

struct Scope<'a, B: Bindings + ?Sized> {
    ctx: &'a B,
    locals: HashMap<String, GeoValue>,
}

impl<B: Bindings + ?Sized> Scope<'_, B> {
    fn lookup(&self, name: &str) -> Option<&GeoValue> {
        self.locals.get(name).or_else(|| self.ctx.lookup(name))
    }
}

/// Runs a program against `ctx`. Local bindings shadow context names.
pub fn evaluate<B: Bindings + ?Sized>(program: &GeoProgram, ctx: &B) -> Result<GeoValue, EvalError> {
    let mut scope = Scope {
        ctx,
        locals: HashMap::new(),
    };
    for stmt in &program.stmts {
        let at = |kind| EvalError {
            pos: stmt.pos(),
            kind,
        };
        match stmt {
            Stmt::Bind { name, expr, .. } => {
                let v = eval_checked(expr, &scope).map_err(at)?;
                scope.locals.insert(name.clone(), v);
            }
            Stmt::Return { expr, .. } => return eval_checked(expr, &scope).map_err(at),
        }
    }
    Err(EvalError {
        pos: Pos::default(),
        kind: EvalErrorKind::Domain("program has no return".into()),
    })
}

/// Evaluates a standalone expression.
pub fn evaluate_expr<B: Bindings + ?Sized>(expr: &Expr, ctx: &B) -> Result<GeoValue, EvalError> {
    let scope = Scope {
        ctx,
        locals: HashMap::new(),
    };
    eval_checked(expr, &scope).map_err(|kind| EvalError {
        pos: Pos::default(),
        kind,
    })
}

fn eval_checked<B: Bindings + ?Sized>(e: &Expr, s: &Scope<B>) -> R<GeoValue> {
    let v = eval(e, s)?;
    if !v.is_finite() {
        return Err(EvalErrorKind::NonFinite);
    }
    if v.depth() > MAX_DEPTH {
        return Err(EvalErrorKind::TooDeep);
    }
    Ok(v)
}

fn eval<B: Bindings + ?Sized>(e: &Expr, s: &Scope<B>) -> R<GeoValue> {
    match e {
        Expr::Num(v) => Ok(GeoValue::Scalar(*v)),
        Expr::Str(t) => Ok(GeoValue::Text(t.clone())),
        Expr::Bool(b) => Ok(GeoValue::Bool(*b)),
        Expr::Name(n, _) => s
            .lookup(n)
            .cloned()
            .ok_or_else(|| EvalErrorKind::Unbound(n.clone())),
        Expr::List(items) => items
            .iter()
            .map(|i| eval(i, s))
            .collect::<R<Vec<_>>>()
            .map(GeoValue::List),
        Expr::Record(fields) => {
            let mut r = BTreeMap::new();
            for (k, v) in fields {
                r.insert(k.clone(), eval(v, s)?);
            }
            Ok(GeoValue::Record(r))
        }
        Expr::Call { func, args, .. } => {
            let vals = args.iter().map(|a| eval(a, s)).collect::<R<Vec<_>>>()?;
            call_builtin(*func, &vals)
        }
        Expr::Field { base, name, .. } => field(&eval(base, s)?, name),
        Expr::Index { base, index, .. } => index_value(&eval(base, s)?, &eval(index, s)?),
        Expr::Unary { op, expr, .. } => {
            let v = eval(expr, s)?;
            match (op, &v) {
                (UnOp::Neg, GeoValue::Scalar(x)) => Ok(GeoValue::Scalar(-x)),
                (UnOp::Neg, GeoValue::Vec3(x)) => Ok(GeoValue::Vec3(-x)),
                (UnOp::Not, GeoValue::Bool(b)) => Ok(GeoValue::Bool(!b)),
                (UnOp::Neg, _) => type_err("-", "scalar or vec3", &v),
                (UnOp::Not, _) => type_err("not", "bool", &v),
            }
        }
        Expr::Binary { op, lhs, rhs, .. } => {
            // short-circuit boolean operators
            if matches!(op, BinOp::And | BinOp::Or) {
                let l = eval(lhs, s)?;
                let GeoValue::Bool(lb) = l else {
                    return type_err(op.symbol(), "bool", &l);
                };
                if (*op == BinOp::And && !lb) || (*op == BinOp::Or && lb) {
                    return Ok(GeoValue::Bool(lb));
                }
                let r = eval(rhs, s)?;
                return match r {
                    GeoValue::Bool(rb) => Ok(GeoValue::Bool(rb)),
                    _ => type_err(op.symbol(), "bool", &r),
                };
            }
            binary(*op, &eval(lhs, s)?, &eval(rhs, s)?)
        }
    }
}

fn binary(op: BinOp, l: &GeoValue, r: &GeoValue) -> R<GeoValue> {
    use GeoValue::*;
    let sym = op.symbol();
    let mismatch = || EvalErrorKind::Type {
        func: sym.to_string(),
        expected: "compatible operands".into(),
        found: format!("{} and {}", l.type_name(), r.type_name()),
    };
    Ok(match (op, l, r) {
        (BinOp::Add, Scalar(a), Scalar(b)) => Scalar(a + b),
        (BinOp::Add, Vec3(a), Vec3(b)) => Vec3(a + b),
        (BinOp::Sub, Scalar(a), Scalar(b)) => Scalar(a - b),
        (BinOp::Sub, Vec3(a), Vec3(b)) => Vec3(a - b),
        (BinOp::Mul, Scalar(a), Scalar(b)) => Scalar(a * b),
        (BinOp::Mul, Scalar(a), Vec3(b)) | (BinOp::Mul, Vec3(b), Scalar(a)) => Vec3(b * *a),
        (BinOp::Mul, Rotation(a), Rotation(b)) => Rotation(a.compose(b)),
        (BinOp::Mul, Rotation(a), Vec3(b)) => Vec3(a.apply(b)),
        (BinOp::Div, Scalar(_), Scalar(b)) | (BinOp::Div, Vec3(_), Scalar(b)) if *b == 0.0 => {
            return Err(EvalErrorKind::Domain("division by zero".into()))
        }
        (BinOp::Div, Scalar(a), Scalar(b)) => Scalar(a / b),
        (BinOp::Div, Vec3(a), Scalar(b)) => Vec3(a / *b),
        (BinOp::Lt, Scalar(a), Scalar(b)) => Bool(a < b),
        (BinOp::Le, Scalar(a), Scalar(b)) => Bool(a <= b),
        (BinOp::Gt, Scalar(a), Scalar(b)) => Bool(a > b),
        (BinOp::Ge, Scalar(a), Scalar(b)) => Bool(a >= b),
        (BinOp::Eq, a, b) if a.type_name() == b.type_name() => Bool(a == b),
        (BinOp::Ne, a, b) if a.type_name() == b.type_name() => Bool(a != b),
        _ => return Err(mismatch()),
    })
}

fn axis_from_name(func: &str, v: &GeoValue) -> R<Axis> {
    match v.as_text().map(|t| t.to_ascii_lowercase()).as_deref() {
        Some("x") => Ok(Axis::X),
        Some("y") => Ok(Axis::Y),
        Some("z") => Ok(Axis::Z),
        _ => type_err(func, "axis name \"x\", \"y\" or \"z\"", v),
    }
}

fn field(v: &GeoValue, name: &str) -> R<GeoValue> {
    let missing = || EvalErrorKind::Domain(format!("{} has no field `{name}`", v.type_name()));
    Ok(match v {
        GeoValue::Vec3(p) => match name {
            "x" => GeoValue::Scalar(p.x),
            "y" => GeoValue::Scalar(p.y),
            "z" => GeoValue::Scalar(p.z),
            _ => return Err(missing()),
        },
        GeoValue::Transform(t) => match name {
            "rotation" => GeoValue::Rotation(t.rotation),
            "translation" => GeoValue::Vec3(t.translation),
            _ => return Err(missing()),
        },
        GeoValue::Frame(f) => match name {
            "origin" => GeoValue::Vec3(f.origin),
            "x_axis" => GeoValue::Vec3(f.x_axis),
            "y_axis" => GeoValue::Vec3(f.y_axis),
            "z_axis" => GeoValue::Vec3(f.z_axis),
            _ => return Err(missing()),
        },
        GeoValue::CardinalMap(m) => {
            let c: Cardinal = name.parse().map_err(|_| missing())?;
            GeoValue::Vec3(m.get(c))
        }
        GeoValue::PointCloud(pc) => match name {
            "points" => GeoValue::List(pc.points.iter().map(|p| GeoValue::Vec3(*p)).collect()),
            _ => return Err(missing()),
        },
        GeoValue::Record(r) => r.get(name).cloned().ok_or_else(missing)?,
        _ => return Err(missing()),
    })
}

fn index_value(v: &GeoValue, idx: &GeoValue) -> R<GeoValue> {
    if let GeoValue::Text(key) = idx {
        return field(v, key);
    }
    let Some(i) = idx.as_scalar() else {
        return type_err("[]", "integer or text index", idx);
    };
    if i.fract() != 0.0 || i < 0.0 {
        return Err(EvalErrorKind::Domain(format!("index {i} is not a non-negative integer")));
    }
    let i = i as usize;
    let oob = |n: usize| EvalErrorKind::Domain(format!("index {i} out of range for length {n}"));
    match v {
        GeoValue::List(items) => items.get(i).cloned().ok_or_else(|| oob(items.len())),
        GeoValue::Vec3(p) if i < 3 => Ok(GeoValue::Scalar(p[i])),
        GeoValue::Vec3(_) => Err(oob(3)),
        _ => type_err("[]", "list or vec3", v),
    }
}

fn arity(func: Builtin, args: &[GeoValue], min: usize, max: usize, spec: &'static str) -> R<()> {
    if args.len() < min || args.len() > max {
        return Err(EvalErrorKind::Arity {
            func: func.name(),
            expected: spec,
            found: args.len(),
        });
    }
    Ok(())
}

fn vec(f: Builtin, v: &GeoValue) -> R<Vec3> {
    match v {
        GeoValue::Vec3(p) => Ok(*p),
        _ => type_err(f.name(), "vec3", v),
    }
}

fn scalar(f: Builtin, v: &GeoValue) -> R<f64> {
    match v {
        GeoValue::Scalar(x) => Ok(*x),
        _ => type_err(f.name(), "scalar", v),
    }
}

fn text(f: Builtin, v: &GeoValue) -> R<String> {
    match v {
        GeoValue::Text(t) => Ok(t.clone()),
        _ => type_err(f.name(), "text", v),
    }
}

fn rotation_of(f: Builtin, v: &GeoValue) -> R<Rotation> {
    match v {
        GeoValue::Rotation(r) => Ok(*r),
        GeoValue::Transform(t) => Ok(t.rotation),
        _ => type_err(f.name(), "rotation or transform", v),
    }
}

fn vec_list(f: Builtin, v: &GeoValue) -> R<Vec<Vec3>> {
    match v {
        GeoValue::PointCloud(pc) => Ok(pc.points.clone()),
        GeoValue::List(items) => items.iter().map(|i| vec(f, i)).collect(),
        _ => type_err(f.name(), "list of vec3 or point cloud", v),
    }
}

fn scalar_list(f: Builtin, v: &GeoValue) -> R<Vec<f64>> {
    match v {
        GeoValue::List(items) if !items.is_empty() => items.iter().map(|i| scalar(f, i)).collect(),
        GeoValue::List(_) => Err(EvalErrorKind::Domain(format!("{}: empty list", f.name()))),
        _ => type_err(f.name(), "list of scalars", v),
    }
}

fn vector_kind(f: Builtin, v: Option<&GeoValue>) -> R<VectorKind> {
    match v {
        None => Ok(VectorKind::Point),
        Some(v) => match text(f, v)?.as_str() {
            "point" => Ok(VectorKind::Point),
            "direction" => Ok(VectorKind::Direction),
            _ => type_err(f.name(), "\"point\" or \"direction\"", v),
        },
    }
}

/// Index of the extreme value; ties resolve to the lowest index.
fn arg_extreme(xs: &[f64], better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if better(x, xs[best]) {
            best = i;
        }
    }
    best
}

pub fn call_builtin(f: Builtin, a: &[GeoValue]) -> R<GeoValue> {
    use Builtin as B;
    let out = match f {
        B::Vec3 => {
            arity(f, a, 3, 3, "3")?;
            GeoValue::Vec3(Vec3::new(scalar(f, &a[0])?, scalar(f, &a[1])?, scalar(f, &a[2])?))
        }
        B::Dot => {
            arity(f, a, 2, 2, "2")?;
            GeoValue::Scalar(vec(f, &a[0])?.dot(&vec(f, &a[1])?))
        }
        B::Cross => {
            arity(f, a, 2, 2, "2")?;
            GeoValue::Vec3(vec(f, &a[0])?.cross(&vec(f, &a[1])?))
        }
        B::Normalize => {
            arity(f, a, 1, 1, "1")?;
            let v = vec(f, &a[0])?;
            let n = v.norm();
            if n == 0.0 {
                return Err(GeometryError::Degenerate("cannot normalize a zero vector".into()).into());
            }
            GeoValue::Vec3(v / n)
        }
        B::Norm => {
            arity(f, a, 1, 1, "1")?;
            GeoValue::Scalar(vec(f, &a[0])?.norm())
        }
        B::Inv => {
            arity(f, a, 1, 1, "1")?;
            match &a[0] {
                GeoValue::Transform(t) => GeoValue::Transform(t.inverse()),
                GeoValue::Rotation(r) => GeoValue::Rotation(r.inverse()),
                other => return type_err(f.name(), "transform or rotation", other),
            }
        }
        B::Compose => {
            arity(f, a, 2, 2, "2")?;
            match (&a[0], &a[1]) {
                (GeoValue::Transform(outer), GeoValue::Transform(inner)) => {
                    GeoValue::Transform(outer.compose(inner)?)
                }
                (GeoValue::Rotation(x), GeoValue::Rotation(y)) => GeoValue::Rotation(x.compose(y)),
                (other, _) => return type_err(f.name(), "two transforms or two rotations", other),
            }
        }
        B::Apply => {
            arity(f, a, 2, 2, "2")?;
            match (&a[0], &a[1]) {
                (GeoValue::Transform(t), GeoValue::Vec3(p)) => GeoValue::Vec3(t.apply_point(p)),
                (GeoValue::Transform(t), GeoValue::PointCloud(pc)) => {
                    GeoValue::PointCloud(transform_points(t, pc)?)
                }
                (GeoValue::Rotation(r), GeoValue::Vec3(p)) => GeoValue::Vec3(r.apply(p)),
                (other, _) => return type_err(f.name(), "transform/rotation and a point", other),
            }
        }
        B::Rotvec => {
            arity(f, a, 1, 1, "1")?;
            GeoValue::Vec3(rotation_of(f, &a[0])?.to_rotvec())
        }
        B::Euler => {
            arity(f, a, 2, 2, "2")?;
            let order: EulerOrder = text(f, &a[1])?.parse()?;
            let e = rotation_of(f, &a[0])?.to_euler(order);
            GeoValue::List(e.angles.iter().map(|x| GeoValue::Scalar(*x)).collect())
        }
        B::RelativeRotation => {
            arity(f, a, 2, 2, "2")?;
            match (&a[0], &a[1]) {
                (GeoValue::Transform(i), GeoValue::Transform(j)) => {
                    GeoValue::Rotation(relative_rotation(i, j))
                }
                (other, _) => return type_err(f.name(), "two poses", other),
            }
        }
        B::Angle => {
            arity(f, a, 1, 1, "1")?;
            GeoValue::Scalar(rotation_of(f, &a[0])?.angle())
        }
        B::Centroid => {
            arity(f, a, 1, 1, "1")?;
            let pc = match &a[0] {
                GeoValue::PointCloud(pc) => geometry::centroid(pc)?,
                other => geometry::centroid(&PointCloud::new(FrameTag::World, vec_list(f, other)?))?,
            };
            GeoValue::Vec3(pc)
        }
        B::ExpressIn => {
            arity(f, a, 2, 3, "2 or 3")?;
            let GeoValue::Frame(fr) = &a[0] else {
                return type_err(f.name(), "frame", &a[0]);
            };
            let kind = vector_kind(f, a.get(2))?;
            GeoValue::Vec3(express_in_frame(fr, &vec(f, &a[1])?, kind))
        }
        B::Frame => {
            arity(f, a, 3, 3, "3")?;
            GeoValue::Frame(build_reference_frame(&FrameInputs {
                origin: vec(f, &a[0])?,
                forward: vec(f, &a[1])?,
                down: vec(f, &a[2])?,
            })?)
        }
        B::Axis => {
            arity(f, a, 2, 2, "2")?;
            let ax = axis_from_name(f.name(), &a[1])?;
            GeoValue::Vec3(match &a[0] {
                GeoValue::Transform(t) => t.axis(ax),
                GeoValue::Rotation(r) => r.column(ax),
                GeoValue::Frame(fr) => match ax {
                    Axis::X => fr.x_axis,
                    Axis::Y => fr.y_axis,
                    Axis::Z => fr.z_axis,
                },
                other => return type_err(f.name(), "transform, rotation or frame", other),
            })
        }
        B::CardinalAxes => {
            arity(f, a, 3, 3, "3")?;
            let name = text(f, &a[0])?;
            let known: Cardinal = name
                .parse()
                .map_err(|_| EvalErrorKind::Domain(format!("unknown cardinal `{name}`")))?;
            GeoValue::CardinalMap(derive_cardinal_axes(known, &vec(f, &a[1])?, &vec(f, &a[2])?)?)
        }
        B::ClassifyCardinal => {
            arity(f, a, 2, 3, "2 or 3")?;
            let GeoValue::CardinalMap(m) = &a[1] else {
                return type_err(f.name(), "cardinal map", &a[1]);
            };
            let margin = match a.get(2) {
                Some(v) => scalar(f, v)?,
                None => DEFAULT_CARDINAL_MARGIN,
            };
            GeoValue::text(classify_cardinal(&vec(f, &a[0])?, m, margin).as_str())
        }
        B::ClassifyRotation => {
            arity(f, a, 1, 2, "1 or 2")?;
            let rv = match &a[0] {
                GeoValue::Vec3(v) => *v,
                other => rotation_of(f, other)?.to_rotvec(),
            };
            let eps = match a.get(1) {
                Some(v) => scalar(f, v)?,
                None => ANGLE_EPSILON,
            };
            GeoValue::text(classify_primary_rotation(&rv, eps).as_str())
        }
        B::Relation => {
            arity(f, a, 2, 3, "2 or 3")?;
            let GeoValue::Frame(fr) = &a[0] else {
                return type_err(f.name(), "frame", &a[0]);
            };
            let eps = match a.get(2) {
                Some(v) => scalar(f, v)?,
                None => 0.0,
            };
            let rel = qualitative_relation(fr, &vec(f, &a[1])?, eps);
            GeoValue::record([
                ("horizontal", GeoValue::text(rel.horizontal.as_str())),
                ("depth", GeoValue::text(rel.depth.as_str())),
                ("vertical", GeoValue::text(rel.vertical.as_str())),
            ])
        }
        B::Distance => {
            arity(f, a, 2, 2, "2")?;
            GeoValue::Scalar((vec(f, &a[0])? - vec(f, &a[1])?).norm())
        }
        B::ScaleBy => {
            arity(f, a, 2, 2, "2")?;
            let k = scalar(f, &a[1])?;
            match &a[0] {
                GeoValue::Scalar(x) => GeoValue::Scalar(x * k),
                GeoValue::Vec3(v) => GeoValue::Vec3(v * k),
                GeoValue::PointCloud(pc) => GeoValue::PointCloud(PointCloud::new(
                    pc.frame.clone(),
                    pc.points.iter().map(|p| p * k).collect(),
                )),
                GeoValue::Transform(t) => {
                    let mut t = t.clone();
                    t.translation *= k;
                    GeoValue::Transform(t)
                }
                other => return type_err(f.name(), "scalar, vec3, point cloud or transform", other),
            }
        }
        B::Argmax | B::Argmin => {
            arity(f, a, 1, 1, "1")?;
            let xs = scalar_list(f, &a[0])?;
            let i = if f == B::Argmax {
                arg_extreme(&xs, |x, best| x > best)
            } else {
                arg_extreme(&xs, |x, best| x < best)
            };
            GeoValue::Scalar(i as f64)
        }
        B::CountUnique => {
            arity(f, a, 1, 2, "1 or 2")?;
            let tau = match a.get(1) {
                Some(v) => scalar(f, v)?,
                None => geometry::DEFAULT_DEDUP_TAU,
            };
            let pts = vec_list(f, &a[0])?;
            GeoValue::Scalar(dedup_count(&pts, tau) as f64)
        }
        B::Min | B::Max => {
            arity(f, a, 1, usize::MAX, "at least 1")?;
            let xs = if a.len() == 1 {
                scalar_list(f, &a[0])?
            } else {
                a.iter().map(|v| scalar(f, v)).collect::<R<_>>()?
            };
            let pick = if f == B::Min { f64::min } else { f64::max };
            GeoValue::Scalar(xs[1..].iter().fold(xs[0], |acc, &x| pick(acc, x)))
        }
        B::Abs => {
            arity(f, a, 1, 1, "1")?;
            GeoValue::Scalar(scalar(f, &a[0])?.abs())
        }
        B::Sign => {
            arity(f, a, 1, 1, "1")?;
            let x = scalar(f, &a[0])?;
            GeoValue::Scalar(if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            })
        }
        B::Sqrt => {
            arity(f, a, 1, 1, "1")?;
            let x = scalar(f, &a[0])?;
            if x < 0.0 {
                return Err(EvalErrorKind::Domain(format!("sqrt of negative value {x}")));
            }
            GeoValue::Scalar(x.sqrt())
        }
        B::Degrees => {
            arity(f, a, 1, 1, "1")?;
            GeoValue::Scalar(scalar(f, &a[0])?.to_degrees())
        }
        B::Len => {
            arity(f, a, 1, 1, "1")?;
            GeoValue::Scalar(match &a[0] {
                GeoValue::List(items) => items.len(),
                GeoValue::PointCloud(pc) => pc.len(),
                GeoValue::Text(t) => t.chars().count(),
                GeoValue::Record(r) => r.len(),
                other => return type_err(f.name(), "list, point cloud, text or record", other),
            } as f64)
        }
    };
    Ok(out)
}
