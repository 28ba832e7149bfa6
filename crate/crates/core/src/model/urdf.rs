//! Loader for the URDF subset understood by this crate.
//!
//! Accepted elements: `robot`, `link` (with optional `inertial`),
//! `joint` (revolute, prismatic, fixed, or a single `floating` joint from
//! `world`), and the `end_effector` extension:
//!
//! ```xml
//! <end_effector name="left_foot" link="l_ankle">
//!   <origin xyz="0 0 -0.05" rpy="0 0 0"/>
//!   <contact kind="plane" lx="0.11" ly="0.07" mu="0.5" fmin="0" fmax="2000"/>
//!   <normal xyz="0 0 1"/>
//! </end_effector>
//! ```
//!
//! Anything else (visual, collision, mimic, transmission, ...) is rejected.

use nalgebra::{Isometry3, Matrix3, Translation3, Unit, UnitQuaternion, Vector3};
use roxmltree::{Document, Node};

use super::{Body, EndEffector, Joint, JointKind, JointLimits, ModelError, RobotModel};
use crate::contact::{ContactKind, ContactSpec};
use crate::model::GRAVITY;

/// Default upper normal-force bound, in multiples of the robot weight.
const DEFAULT_MAX_NORMAL_WEIGHTS: f64 = 10.0;

struct Ctx<'a> {
    doc: &'a Document<'a>,
}

impl<'a> Ctx<'a> {
    fn err(&self, node: Node, message: impl Into<String>) -> ModelError {
        let pos = self.doc.text_pos_at(node.range().start);
        ModelError::Parse {
            line: pos.row,
            element: node.tag_name().name().to_string(),
            message: message.into(),
        }
    }

    fn attr<'n>(&self, node: Node<'n, 'n>, name: &str) -> Result<&'n str, ModelError> {
        node.attribute(name)
            .ok_or_else(|| self.err(node, format!("missing attribute `{name}`")))
    }

    fn float(&self, node: Node, name: &str) -> Result<f64, ModelError> {
        let raw = self.attr(node, name)?;
        raw.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.err(node, format!("attribute `{name}`: `{raw}` is not a finite number")))
    }

    fn float_or(&self, node: Node, name: &str, default: f64) -> Result<f64, ModelError> {
        if node.attribute(name).is_some() {
            self.float(node, name)
        } else {
            Ok(default)
        }
    }

    fn vec3(&self, node: Node, name: &str, default: Vector3<f64>) -> Result<Vector3<f64>, ModelError> {
        let Some(raw) = node.attribute(name) else { return Ok(default) };
        let parts: Vec<f64> = raw
            .split_whitespace()
            .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<_>>()
            .ok_or_else(|| self.err(node, format!("attribute `{name}`: `{raw}` is not a number triple")))?;
        match parts.as_slice() {
            [x, y, z] => Ok(Vector3::new(*x, *y, *z)),
            _ => Err(self.err(node, format!("attribute `{name}` needs exactly 3 numbers"))),
        }
    }

    fn origin(&self, node: Node) -> Result<Isometry3<f64>, ModelError> {
        let xyz = self.vec3(node, "xyz", Vector3::zeros())?;
        let rpy = self.vec3(node, "rpy", Vector3::zeros())?;
        Ok(Isometry3::from_parts(
            Translation3::from(xyz),
            UnitQuaternion::from_euler_angles(rpy.x, rpy.y, rpy.z),
        ))
    }

    fn elements<'n>(&self, node: Node<'n, 'n>, allowed: &[&str]) -> Result<Vec<Node<'n, 'n>>, ModelError> {
        let mut out = Vec::new();
        for child in node.children() {
            if child.is_text() && !child.text().unwrap_or("").trim().is_empty() {
                return Err(self.err(node, "unexpected text content"));
            }
            if !child.is_element() {
                continue;
            }
            let tag = child.tag_name().name();
            if !allowed.contains(&tag) {
                return Err(self.err(child, format!("unsupported element <{tag}> inside <{}>", node.tag_name().name())));
            }
            out.push(child);
        }
        Ok(out)
    }

    fn single<'n>(&self, parent: Node<'n, 'n>, children: &[Node<'n, 'n>], tag: &str) -> Result<Option<Node<'n, 'n>>, ModelError> {
        let mut found = children.iter().filter(|c| c.tag_name().name() == tag);
        let first = found.next().copied();
        if found.next().is_some() {
            return Err(self.err(parent, format!("duplicate <{tag}>")));
        }
        Ok(first)
    }
}

/// Parse a model document. Bodies, joints and actuated dofs follow document order.
pub fn load_model(text: &str) -> Result<RobotModel, ModelError> {
    let doc = Document::parse(text).map_err(|e| {
        let pos = e.pos();
        ModelError::Parse { line: pos.row, element: "xml".into(), message: e.to_string() }
    })?;
    let ctx = Ctx { doc: &doc };
    let robot = doc.root_element();
    if robot.tag_name().name() != "robot" {
        return Err(ctx.err(robot, "root element must be <robot>"));
    }
    let name = robot.attribute("name").unwrap_or("robot").to_string();
    let children = ctx.elements(robot, &["link", "joint", "end_effector"])?;

    let mut bodies: Vec<Body> = Vec::new();
    for link in children.iter().filter(|n| n.tag_name().name() == "link") {
        bodies.push(parse_link(&ctx, *link, &bodies)?);
    }
    let body_of = |bodies: &[Body], node: Node, name: &str| {
        bodies
            .iter()
            .position(|b| b.name == name)
            .ok_or_else(|| ctx.err(node, format!("unknown link `{name}`")))
    };

    let mut joints: Vec<Joint> = Vec::new();
    let mut floating_root: Option<usize> = None;
    let mut next_dof = 0;
    for node in children.iter().copied().filter(|n| n.tag_name().name() == "joint") {
        let jname = ctx.attr(node, "name")?.to_string();
        if joints.iter().any(|j| j.name == jname) {
            return Err(ctx.err(node, format!("duplicate joint `{jname}`")));
        }
        let ty = ctx.attr(node, "type")?;
        let parts = ctx.elements(node, &["origin", "parent", "child", "axis", "limit"])?;
        let parent_node = ctx
            .single(node, &parts, "parent")?
            .ok_or_else(|| ctx.err(node, "missing <parent>"))?;
        let child_node = ctx
            .single(node, &parts, "child")?
            .ok_or_else(|| ctx.err(node, "missing <child>"))?;
        let parent_name = ctx.attr(parent_node, "link")?;
        let child = body_of(&bodies, child_node, ctx.attr(child_node, "link")?)?;

        if ty == "floating" {
            if parent_name != "world" {
                return Err(ctx.err(node, "a floating joint must have parent `world`"));
            }
            if floating_root.replace(child).is_some() {
                return Err(ctx.err(node, "more than one floating joint"));
            }
            continue;
        }
        let kind = match ty {
            "revolute" => JointKind::Revolute,
            "prismatic" => JointKind::Prismatic,
            "fixed" => JointKind::Fixed,
            other => return Err(ctx.err(node, format!("unsupported joint type `{other}`"))),
        };
        let parent = body_of(&bodies, parent_node, parent_name)?;
        if parent == child {
            return Err(ModelError::Loop(bodies[child].name.clone()));
        }
        if bodies[child].parent_joint.is_some() {
            return Err(ctx.err(node, format!("link `{}` has more than one parent joint", bodies[child].name)));
        }

        let origin = match ctx.single(node, &parts, "origin")? {
            Some(o) => ctx.origin(o)?,
            None => Isometry3::identity(),
        };
        let axis_raw = match ctx.single(node, &parts, "axis")? {
            Some(a) => ctx.vec3(a, "xyz", Vector3::x())?,
            None => Vector3::x(),
        };
        if axis_raw.norm() < 1e-12 {
            return Err(ctx.err(node, "joint axis must be nonzero"));
        }
        let axis = Unit::new_normalize(axis_raw);

        let limits = match ctx.single(node, &parts, "limit")? {
            Some(l) => {
                let limits = JointLimits {
                    lower: ctx.float_or(l, "lower", 0.0)?,
                    upper: ctx.float_or(l, "upper", 0.0)?,
                    effort: ctx.float(l, "effort")?,
                    velocity: ctx.float(l, "velocity")?,
                };
                if limits.lower > limits.upper {
                    return Err(ctx.err(l, "lower limit exceeds upper limit"));
                }
                if limits.effort < 0.0 || limits.velocity < 0.0 {
                    return Err(ctx.err(l, "effort and velocity limits must be non-negative"));
                }
                Some(limits)
            }
            None if kind == JointKind::Fixed => None,
            None => return Err(ModelError::MissingLimit(jname)),
        };
        let dof = (kind != JointKind::Fixed).then(|| {
            next_dof += 1;
            next_dof - 1
        });
        bodies[child].parent_joint = Some(joints.len());
        joints.push(Joint {
            name: jname,
            kind,
            axis,
            parent,
            child,
            origin,
            limits: if kind == JointKind::Fixed { None } else { limits },
            dof,
        });
    }
    if let Some(root) = floating_root {
        if bodies[root].parent_joint.is_some() {
            return Err(ModelError::Loop(bodies[root].name.clone()));
        }
    }

    let weight = bodies.iter().map(|b| b.mass).sum::<f64>() * GRAVITY.norm();
    let mut end_effectors = Vec::new();
    for node in children.iter().copied().filter(|n| n.tag_name().name() == "end_effector") {
        let ee = parse_end_effector(&ctx, node, &bodies, weight)?;
        if end_effectors.iter().any(|e: &EndEffector| e.name == ee.name) {
            return Err(ctx.err(node, format!("duplicate end effector `{}`", ee.name)));
        }
        end_effectors.push(ee);
    }

    RobotModel::from_parts(name, bodies, joints, end_effectors)
}

fn parse_link(ctx: &Ctx, link: Node, existing: &[Body]) -> Result<Body, ModelError> {
    let name = ctx.attr(link, "name")?.to_string();
    if name == "world" {
        return Err(ctx.err(link, "`world` is reserved for the floating joint parent"));
    }
    if existing.iter().any(|b| b.name == name) {
        return Err(ctx.err(link, format!("duplicate link `{name}`")));
    }
    let parts = ctx.elements(link, &["inertial"])?;
    let mut body = Body {
        name,
        mass: 0.0,
        com: Vector3::zeros(),
        inertia: Matrix3::zeros(),
        parent_joint: None,
    };
    if let Some(inertial) = ctx.single(link, &parts, "inertial")? {
        let items = ctx.elements(inertial, &["origin", "mass", "inertia"])?;
        let frame = match ctx.single(inertial, &items, "origin")? {
            Some(o) => ctx.origin(o)?,
            None => Isometry3::identity(),
        };
        body.com = frame.translation.vector;
        if let Some(m) = ctx.single(inertial, &items, "mass")? {
            body.mass = ctx.float(m, "value")?;
            if body.mass < 0.0 {
                return Err(ctx.err(m, "mass must be non-negative"));
            }
        }
        if let Some(i) = ctx.single(inertial, &items, "inertia")? {
            let g = |n: &str| ctx.float_or(i, n, 0.0);
            let local = Matrix3::new(
                g("ixx")?, g("ixy")?, g("ixz")?,
                g("ixy")?, g("iyy")?, g("iyz")?,
                g("ixz")?, g("iyz")?, g("izz")?,
            );
            let r = frame.rotation.to_rotation_matrix().into_inner();
            body.inertia = r * local * r.transpose();
        }
    }
    Ok(body)
}

fn parse_end_effector(ctx: &Ctx, node: Node, bodies: &[Body], weight: f64) -> Result<EndEffector, ModelError> {
    let name = ctx.attr(node, "name")?.to_string();
    let link = ctx.attr(node, "link")?;
    let body = bodies
        .iter()
        .position(|b| b.name == link)
        .ok_or_else(|| ctx.err(node, format!("unknown link `{link}`")))?;
    let parts = ctx.elements(node, &["origin", "contact", "normal"])?;
    let offset = match ctx.single(node, &parts, "origin")? {
        Some(o) => ctx.origin(o)?,
        None => Isometry3::identity(),
    };
    let c = ctx
        .single(node, &parts, "contact")?
        .ok_or_else(|| ctx.err(node, "missing <contact>"))?;
    let kind = match ctx.attr(c, "kind")? {
        "plane" => ContactKind::Plane,
        "point" => ContactKind::Point,
        other => return Err(ctx.err(c, format!("unknown contact kind `{other}`"))),
    };
    let (half_length_x, half_length_y) = match kind {
        ContactKind::Plane => (ctx.float(c, "lx")?, ctx.float(c, "ly")?),
        ContactKind::Point => (0.0, 0.0),
    };
    let normal = match ctx.single(node, &parts, "normal")? {
        Some(n) => ctx.vec3(n, "xyz", Vector3::z())?,
        None => Vector3::z(),
    };
    if normal.norm() < 1e-12 {
        return Err(ctx.err(node, "surface normal must be nonzero"));
    }
    let spec = ContactSpec {
        kind,
        half_length_x,
        half_length_y,
        friction: ctx.float(c, "mu")?,
        min_normal: ctx.float_or(c, "fmin", 0.0)?,
        max_normal: ctx.float_or(c, "fmax", DEFAULT_MAX_NORMAL_WEIGHTS * weight.max(1.0))?,
        surface_normal: normal.normalize(),
    };
    spec.validate().map_err(|e| ctx.err(c, e.to_string()))?;
    Ok(EndEffector { name, body, offset, contact: spec })
}
