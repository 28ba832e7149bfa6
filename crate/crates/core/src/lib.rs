//! Multi-contact whole-body quasi-static retargeting.
//!
//! One linearized QP per control tick maps operator end-effector and force
//! commands onto a configuration, joint torques and contact wrenches that are
//! statically balanced and inside every contact wrench cone.

pub mod assets;
pub mod contact;
pub mod io;
pub mod model;
pub mod par;
pub mod qp;
pub mod retarget;
pub mod runtime;

#[doc(hidden)]
pub mod testing;
