use std::collections::BTreeMap;

use crate::arch::{Architecture, ConvParams, LayerOp, LayerSpec, TensorShape, Window};
use crate::firegen::{self, BypassVariant};

use super::{CatalogEntry, CatalogError, PublishedShape};

pub const BUILTIN_NAMES: [&str; 8] = [
    "nin",
    "squeezenet",
    "squeezenet-simple-bypass",
    "squeezenet-complex-bypass",
    "alexnet",
    "vgg19",
    "lenet",
    "lenet-224",
];

pub fn builtin(name: &str) -> Result<CatalogEntry, CatalogError> {
    let entry = match name {
        "nin" => nin(),
        "squeezenet" => squeezenet(),
        "squeezenet-simple-bypass" => squeezenet_bypass(BypassVariant::Simple),
        "squeezenet-complex-bypass" => squeezenet_bypass(BypassVariant::Complex),
        "alexnet" => alexnet(1),
        "vgg19" => vgg19(),
        "lenet" => lenet(),
        "lenet-224" => lenet_224(),
        _ => return Err(CatalogError::UnknownBuiltin(name.to_string())),
    };
    Ok(entry)
}

pub fn all_builtins() -> Vec<CatalogEntry> {
    BUILTIN_NAMES
        .iter()
        .map(|n| builtin(n).expect("listed builtin"))
        .collect()
}

fn shape(channels: u64, hw: u64) -> TensorShape {
    TensorShape::new(1, channels, hw, hw).expect("positive builtin dimensions")
}

fn annotations(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn published(rows: &[(&str, u64, u64)]) -> Vec<PublishedShape> {
    rows.iter()
        .map(|&(layer, channels, hw)| PublishedShape {
            layer: layer.to_string(),
            channels,
            height: hw,
            width: hw,
        })
        .collect()
}

/// Network-in-Network, ImageNet variant. Pads are chosen so every output size
/// matches the published table; bias terms are not modeled.
pub fn nin() -> CatalogEntry {
    let layers = vec![
        LayerSpec::input("data"),
        LayerSpec::conv("conv1", "data", 96, 11, 4, 0),
        LayerSpec::conv("conv2", "conv1", 96, 1, 1, 0),
        LayerSpec::conv("conv3", "conv2", 96, 1, 1, 0),
        LayerSpec::max_pool("pool3", "conv3", 3, 2),
        LayerSpec::conv("conv4", "pool3", 256, 5, 1, 2),
        LayerSpec::conv("conv5", "conv4", 256, 1, 1, 0),
        LayerSpec::conv("conv6", "conv5", 256, 1, 1, 0),
        LayerSpec::max_pool("pool6", "conv6", 3, 2),
        LayerSpec::conv("conv7", "pool6", 384, 3, 1, 1),
        LayerSpec::conv("conv8", "conv7", 384, 1, 1, 0),
        LayerSpec::conv("conv9", "conv8", 384, 1, 1, 0),
        LayerSpec::max_pool("pool9", "conv9", 3, 2),
        LayerSpec::conv("conv10", "pool9", 1024, 3, 1, 1),
        LayerSpec::conv("conv11", "conv10", 1024, 1, 1, 0),
        LayerSpec::conv("conv12", "conv11", 1000, 1, 1, 0),
        LayerSpec::global_avg_pool("pool12", "conv12"),
    ];
    let mut arch = Architecture::new("nin", shape(3, 227), layers);
    arch.metadata.insert(
        "description".into(),
        "Network-in-Network for 1000-class ImageNet".into(),
    );
    CatalogEntry {
        architecture: arch,
        annotations: annotations(&[
            ("reported.top1_accuracy", "58.9%"),
            ("reported.epochs_to_converge", "47"),
        ]),
        published_shapes: published(&[
            ("data", 3, 227),
            ("conv1", 96, 55),
            ("conv2", 96, 55),
            ("conv3", 96, 55),
            ("pool3", 96, 27),
            ("conv4", 256, 27),
            ("conv5", 256, 27),
            ("conv6", 256, 27),
            ("pool6", 256, 13),
            ("conv7", 384, 13),
            ("conv8", 384, 13),
            ("conv9", 384, 13),
            ("pool9", 384, 6),
            ("conv10", 1024, 6),
            ("conv11", 1024, 6),
            ("conv12", 1000, 6),
            ("pool12", 1000, 1),
        ]),
    }
}

fn fire(layers: &mut Vec<LayerSpec>, module: &str, input: &str, s: u64, e1: u64, e3: u64) {
    let squeeze = format!("{module}/squeeze1x1");
    let expand1 = format!("{module}/expand1x1");
    let expand3 = format!("{module}/expand3x3");
    layers.push(LayerSpec::conv(&squeeze, input, s, 1, 1, 0));
    layers.push(LayerSpec::conv(&expand1, &squeeze, e1, 1, 1, 0));
    layers.push(LayerSpec::conv(&expand3, &squeeze, e3, 3, 1, 1));
    layers.push(LayerSpec::new(
        format!("{module}/concat"),
        LayerOp::Concat,
        &[&expand1, &expand3],
    ));
}

/// SqueezeNet v1.0: 8 Fire modules between a 7x7 stem and a 1x1 classifier.
pub fn squeezenet() -> CatalogEntry {
    let mut layers = vec![
        LayerSpec::input("data"),
        LayerSpec::conv("conv1", "data", 96, 7, 2, 0),
        LayerSpec::max_pool("maxpool1", "conv1", 3, 2),
    ];
    fire(&mut layers, "fire2", "maxpool1", 16, 64, 64);
    fire(&mut layers, "fire3", "fire2/concat", 16, 64, 64);
    fire(&mut layers, "fire4", "fire3/concat", 32, 128, 128);
    layers.push(LayerSpec::max_pool("maxpool4", "fire4/concat", 3, 2));
    fire(&mut layers, "fire5", "maxpool4", 32, 128, 128);
    fire(&mut layers, "fire6", "fire5/concat", 48, 192, 192);
    fire(&mut layers, "fire7", "fire6/concat", 48, 192, 192);
    fire(&mut layers, "fire8", "fire7/concat", 64, 256, 256);
    layers.push(LayerSpec::max_pool("maxpool8", "fire8/concat", 3, 2));
    fire(&mut layers, "fire9", "maxpool8", 64, 256, 256);
    layers.push(LayerSpec::new("drop9", LayerOp::Dropout, &["fire9/concat"]));
    layers.push(LayerSpec::conv("conv10", "drop9", 1000, 1, 1, 0));
    layers.push(LayerSpec::global_avg_pool("avgpool10", "conv10"));

    CatalogEntry {
        architecture: Architecture::new("squeezenet", shape(3, 227), layers),
        annotations: annotations(&[
            ("reported.model_size", "4.8MB"),
            ("reported.top1_accuracy", "57.5%"),
            ("reported.top5_accuracy", "80.3%"),
        ]),
        published_shapes: squeezenet_shapes(),
    }
}

fn squeezenet_shapes() -> Vec<PublishedShape> {
    published(&[
        ("conv1", 96, 111),
        ("maxpool1", 96, 55),
        ("fire2/concat", 128, 55),
        ("fire3/concat", 128, 55),
        ("fire4/concat", 256, 55),
        ("maxpool4", 256, 27),
        ("fire5/concat", 256, 27),
        ("fire6/concat", 384, 27),
        ("fire7/concat", 384, 27),
        ("fire8/concat", 512, 27),
        ("maxpool8", 512, 13),
        ("fire9/concat", 512, 13),
        ("conv10", 1000, 13),
        ("avgpool10", 1000, 1),
    ])
}

fn squeezenet_bypass(variant: BypassVariant) -> CatalogEntry {
    let base = squeezenet();
    let mut arch = firegen::with_bypass(&base.architecture, variant)
        .expect("squeezenet accepts both bypass variants");
    let (name, size, top1, top5) = match variant {
        BypassVariant::Simple => ("squeezenet-simple-bypass", "4.8MB", "60.4%", "82.5%"),
        BypassVariant::Complex => ("squeezenet-complex-bypass", "7.7MB", "58.8%", "82.0%"),
        BypassVariant::Vanilla => ("squeezenet", "4.8MB", "57.5%", "80.3%"),
    };
    arch.name = name.to_string();
    CatalogEntry {
        architecture: arch,
        annotations: annotations(&[
            ("reported.model_size", size),
            ("reported.top1_accuracy", top1),
            ("reported.top5_accuracy", top5),
        ]),
        published_shapes: base.published_shapes,
    }
}

fn grouped_conv(
    name: &str,
    input: &str,
    filters: u64,
    filter: u64,
    pad: u64,
    groups: u64,
) -> LayerSpec {
    LayerSpec::new(
        name,
        LayerOp::Convolution(ConvParams {
            num_filters: filters,
            window: Window::square(filter, 1, pad),
            groups,
        }),
        &[input],
    )
}

/// AlexNet at 227x227. `groups` applies to conv2, conv4 and conv5; the
/// catalog entry uses 1 (see README for the grouped variant).
pub fn alexnet(groups: u64) -> CatalogEntry {
    let layers = vec![
        LayerSpec::input("data"),
        LayerSpec::conv("conv1", "data", 96, 11, 4, 0),
        LayerSpec::max_pool("pool1", "conv1", 3, 2),
        grouped_conv("conv2", "pool1", 256, 5, 2, groups),
        LayerSpec::max_pool("pool2", "conv2", 3, 2),
        grouped_conv("conv3", "pool2", 384, 3, 1, 1),
        grouped_conv("conv4", "conv3", 384, 3, 1, groups),
        grouped_conv("conv5", "conv4", 256, 3, 1, groups),
        LayerSpec::max_pool("pool5", "conv5", 3, 2),
        LayerSpec::fully_connected("fc6", "pool5", 4096),
        LayerSpec::fully_connected("fc7", "fc6", 4096),
        LayerSpec::fully_connected("fc8", "fc7", 1000),
    ];
    let mut arch = Architecture::new("alexnet", shape(3, 227), layers);
    arch.metadata.insert("groups".into(), groups.to_string());
    CatalogEntry {
        architecture: arch,
        annotations: annotations(&[
            ("reported.model_size", "240MB"),
            ("reported.top1_accuracy", "57.2%"),
            ("reported.top5_accuracy", "80.3%"),
        ]),
        published_shapes: published(&[
            ("conv1", 96, 55),
            ("pool1", 96, 27),
            ("conv2", 256, 27),
            ("pool2", 256, 13),
            ("conv5", 256, 13),
            ("pool5", 256, 6),
            ("fc8", 1000, 1),
        ]),
    }
}

/// VGG-19 (configuration E) at 224x224.
pub fn vgg19() -> CatalogEntry {
    let blocks: [(u64, usize); 5] = [(64, 2), (128, 2), (256, 4), (512, 4), (512, 4)];
    let mut layers = vec![LayerSpec::input("data")];
    let mut prev = "data".to_string();
    for (b, &(filters, convs)) in blocks.iter().enumerate() {
        for c in 0..convs {
            let name = format!("conv{}_{}", b + 1, c + 1);
            layers.push(LayerSpec::conv(&name, &prev, filters, 3, 1, 1));
            prev = name;
        }
        let name = format!("pool{}", b + 1);
        layers.push(LayerSpec::max_pool(&name, &prev, 2, 2));
        prev = name;
    }
    layers.push(LayerSpec::fully_connected("fc6", &prev, 4096));
    layers.push(LayerSpec::fully_connected("fc7", "fc6", 4096));
    layers.push(LayerSpec::fully_connected("fc8", "fc7", 1000));
    CatalogEntry {
        architecture: Architecture::new("vgg19", shape(3, 224), layers),
        annotations: BTreeMap::new(),
        published_shapes: published(&[
            ("pool1", 64, 112),
            ("pool2", 128, 56),
            ("pool3", 256, 28),
            ("pool4", 512, 14),
            ("pool5", 512, 7),
            ("fc8", 1000, 1),
        ]),
    }
}

fn lenet_stem(layers: &mut Vec<LayerSpec>) {
    layers.push(LayerSpec::input("data"));
    layers.push(LayerSpec::conv("conv1", "data", 20, 5, 1, 0));
    layers.push(LayerSpec::max_pool("pool1", "conv1", 2, 2));
    layers.push(LayerSpec::conv("conv2", "pool1", 50, 5, 1, 0));
    layers.push(LayerSpec::max_pool("pool2", "conv2", 2, 2));
}

/// LeNet for 28x28 single-channel digits.
pub fn lenet() -> CatalogEntry {
    let mut layers = Vec::new();
    lenet_stem(&mut layers);
    layers.push(LayerSpec::fully_connected("ip1", "pool2", 500));
    layers.push(LayerSpec::new("relu1", LayerOp::Relu, &["ip1"]));
    layers.push(LayerSpec::fully_connected("ip2", "relu1", 10));
    CatalogEntry {
        architecture: Architecture::new("lenet", shape(1, 28), layers),
        annotations: annotations(&[("reported.forward_flops_per_frame", "5.74M")]),
        published_shapes: published(&[
            ("conv1", 20, 24),
            ("pool1", 20, 12),
            ("conv2", 50, 8),
            ("pool2", 50, 4),
            ("ip2", 10, 1),
        ]),
    }
}

/// LeNet applied to 224x224 frames: `ip1` becomes a 4x4 convolution slid
/// over the larger feature map, followed by global average pooling.
pub fn lenet_224() -> CatalogEntry {
    let mut layers = Vec::new();
    lenet_stem(&mut layers);
    layers.push(LayerSpec::conv("ip1", "pool2", 500, 4, 1, 0));
    layers.push(LayerSpec::global_avg_pool("ip1/pool", "ip1"));
    layers.push(LayerSpec::new("relu1", LayerOp::Relu, &["ip1/pool"]));
    layers.push(LayerSpec::fully_connected("ip2", "relu1", 10));
    CatalogEntry {
        architecture: Architecture::new("lenet-224", shape(1, 224), layers),
        annotations: annotations(&[("reported.forward_flops_per_frame", "2700M")]),
        published_shapes: published(&[("pool2", 50, 53), ("ip1", 500, 50), ("ip2", 10, 1)]),
    }
}
