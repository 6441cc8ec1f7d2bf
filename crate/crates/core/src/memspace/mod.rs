//! Portability substrate: arrays mirrored across two memory spaces, layout
//! policies, and scatter accumulation with selectable write deconfliction.

mod dual;
mod layout;
mod scatter;

pub use dual::{DualArray, Space, View, ViewMut};
pub use layout::LayoutPolicy;
pub use scatter::{ScatterAccumulator, ScatterSink, Strategy};
