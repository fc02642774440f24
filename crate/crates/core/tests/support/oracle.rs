//! Brute-force reference for shapes and per-layer costs, plus a generator
//! of small random architectures with their enumerated counts.
#![allow(dead_code)]

use dse_core::arch::{Architecture, ConvParams, LayerOp, LayerSpec, Rounding, TensorShape, Window};
use proptest::prelude::*;

/// Output length by sliding a window over the padded input one placement at
/// a time. Floor keeps only placements that fit; ceil keeps placing windows
/// until the padded input is covered.
pub fn slide(input: u64, pad: u64, filter: u64, stride: u64, ceil: bool) -> Option<u64> {
    let padded = input + 2 * pad;
    if filter > padded {
        return None;
    }
    let mut placements = 0;
    let mut start = 0;
    loop {
        if start + filter > padded && !ceil {
            break;
        }
        placements += 1;
        if start + filter >= padded {
            break;
        }
        start += stride;
    }
    Some(placements)
}

#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub b: u64,
    pub c: u64,
    pub h: u64,
    pub w: u64,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct Counts {
    pub params: u128,
    pub flops: u128,
    pub activations: u128,
}

/// Enumerates every output element and every term feeding it.
pub fn enumerate(op: &LayerOp, inputs: &[Shape]) -> Option<(Shape, Counts)> {
    let x = inputs[0];
    let mut counts = Counts::default();
    let out = match op {
        LayerOp::Convolution(c) => {
            let w = &c.window;
            let ceil = w.rounding == Rounding::Ceil;
            let oh = slide(x.h, w.pad_h, w.filter_h, w.stride, ceil)?;
            let ow = slide(x.w, w.pad_w, w.filter_w, w.stride, ceil)?;
            let per_group = x.c / c.groups;
            for _oc in 0..c.num_filters {
                for _ic in 0..per_group {
                    for _ky in 0..w.filter_h {
                        for _kx in 0..w.filter_w {
                            counts.params += 1;
                        }
                    }
                }
            }
            for _n in 0..x.b {
                for _oc in 0..c.num_filters {
                    for _y in 0..oh {
                        for _x in 0..ow {
                            for _ic in 0..per_group {
                                for _ky in 0..w.filter_h {
                                    for _kx in 0..w.filter_w {
                                        counts.flops += 2;
                                    }
                                }
                            }
                        }
                    }
                }
            }
            Shape {
                b: x.b,
                c: c.num_filters,
                h: oh,
                w: ow,
            }
        }
        LayerOp::FullyConnected { num_filters } => {
            for _oc in 0..*num_filters {
                for _i in 0..x.c * x.h * x.w {
                    counts.params += 1;
                }
            }
            for _n in 0..x.b {
                for _oc in 0..*num_filters {
                    for _i in 0..x.c * x.h * x.w {
                        counts.flops += 2;
                    }
                }
            }
            Shape {
                b: x.b,
                c: *num_filters,
                h: 1,
                w: 1,
            }
        }
        LayerOp::MaxPool(w) | LayerOp::AvgPool(w) => {
            let ceil = w.rounding != Rounding::Floor;
            let oh = slide(x.h, w.pad_h, w.filter_h, w.stride, ceil)?;
            let ow = slide(x.w, w.pad_w, w.filter_w, w.stride, ceil)?;
            let per_tap = if matches!(op, LayerOp::MaxPool(_)) {
                1
            } else {
                2
            };
            for _n in 0..x.b {
                for _ch in 0..x.c {
                    for _y in 0..oh {
                        for _x in 0..ow {
                            for _t in 0..w.filter_h * w.filter_w {
                                counts.flops += per_tap;
                            }
                        }
                    }
                }
            }
            Shape { h: oh, w: ow, ..x }
        }
        LayerOp::GlobalAvgPool => {
            for _n in 0..x.b {
                for _ch in 0..x.c {
                    for _t in 0..x.h * x.w {
                        counts.flops += 2;
                    }
                }
            }
            Shape { h: 1, w: 1, ..x }
        }
        LayerOp::Relu | LayerOp::Dropout => x,
        LayerOp::Concat => Shape {
            c: inputs.iter().map(|s| s.c).sum(),
            ..x
        },
        LayerOp::ElementwiseAdd => x,
        LayerOp::Input => unreachable!("input handled by the caller"),
    };
    for _e in 0..out.b * out.c * out.h * out.w {
        counts.activations += 4;
    }
    Some((out, counts))
}

/// Raw random choices for one layer; turned into a valid layer against the
/// shapes built so far.
pub type Recipe = (u8, u64, u64, u64, u64, u8, usize);

pub fn recipe() -> impl Strategy<Value = Recipe> {
    (
        0u8..8,
        1u64..=8,
        1u64..=4,
        1u64..=3,
        0u64..=2,
        0u8..3,
        0usize..8,
    )
}

#[derive(Debug, Clone)]
pub struct Built {
    pub arch: Architecture,
    pub shapes: Vec<Shape>,
    pub counts: Counts,
}

pub fn build(input: (u64, u64, u64, u64), recipes: &[Recipe]) -> Built {
    let (b, c, h, w) = input;
    let mut layers = vec![LayerSpec::input("data")];
    let mut shapes = vec![Shape { b, c, h, w }];
    let mut counts = Counts::default();

    for (i, &(kind, filters, filter, stride, pad, rounding, other)) in recipes.iter().enumerate() {
        let name = format!("l{i}");
        let prev = layers.last().unwrap().name.clone();
        let x = *shapes.last().unwrap();
        let rounding = [Rounding::Default, Rounding::Floor, Rounding::Ceil][rounding as usize];
        let window = Window {
            filter_h: filter,
            filter_w: (filter % 3) + 1,
            stride,
            pad_h: pad,
            pad_w: pad.min(1),
            rounding,
        };
        let partner = other % layers.len();
        let partner_shape = shapes[partner];
        let (op, inputs): (LayerOp, Vec<String>) = match kind {
            0 | 1 => {
                let groups = if x.c % 2 == 0 && filters % 2 == 0 && kind == 1 {
                    2
                } else {
                    1
                };
                (
                    LayerOp::Convolution(ConvParams {
                        num_filters: filters,
                        window,
                        groups,
                    }),
                    vec![prev],
                )
            }
            2 => (LayerOp::MaxPool(window), vec![prev]),
            3 => (LayerOp::AvgPool(window), vec![prev]),
            4 => (LayerOp::GlobalAvgPool, vec![prev]),
            5 => (
                LayerOp::FullyConnected {
                    num_filters: filters,
                },
                vec![prev],
            ),
            6 if partner_shape.h == x.h
                && partner_shape.w == x.w
                && partner != layers.len() - 1 =>
            {
                (LayerOp::Concat, vec![prev, layers[partner].name.clone()])
            }
            7 if partner_shape.h == x.h
                && partner_shape.w == x.w
                && partner_shape.c == x.c
                && partner != layers.len() - 1 =>
            {
                (
                    LayerOp::ElementwiseAdd,
                    vec![prev, layers[partner].name.clone()],
                )
            }
            _ => (LayerOp::Relu, vec![prev]),
        };
        let in_shapes: Vec<Shape> = inputs
            .iter()
            .map(|n| shapes[layers.iter().position(|l| &l.name == n).unwrap()])
            .collect();
        // A window that does not fit degrades to a ReLU so every case is valid.
        let (op, inputs, (out, c)) = match enumerate(&op, &in_shapes) {
            Some(r) => (op, inputs, r),
            None => {
                let prev = layers.last().unwrap().name.clone();
                (
                    LayerOp::Relu,
                    vec![prev],
                    enumerate(&LayerOp::Relu, &[x]).unwrap(),
                )
            }
        };
        counts.params += c.params;
        counts.flops += c.flops;
        counts.activations += c.activations;
        let refs: Vec<&str> = inputs.iter().map(String::as_str).collect();
        layers.push(LayerSpec::new(name, op, &refs));
        shapes.push(out);
    }

    Built {
        arch: Architecture::new("random", TensorShape::new(1, c, h, w).unwrap(), layers),
        shapes,
        counts,
    }
}

pub fn arch_strategy() -> impl Strategy<Value = (u64, Built)> {
    (
        1u64..=2,
        1u64..=8,
        1u64..=8,
        1u64..=8,
        prop::collection::vec(recipe(), 1..=4),
    )
        .prop_map(|(b, c, h, w, recipes)| (b, build((b, c, h, w), &recipes)))
}
