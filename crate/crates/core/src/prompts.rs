//! The 80-template prompt bank, per-dataset baseline prompts, and the
//! benchmark dataset table.

/// Placeholder token substituted with a class name.
pub const CLASS_TOKEN: &str = "[CLASS]";

/// The standard 80 zero-shot prompt templates, in bank order.
pub const TEMPLATE_BANK: [&str; 80] = [
    "a bad photo of a [CLASS].",
    "a photo of many [CLASS].",
    "a sculpture of a [CLASS].",
    "a photo of the hard to see [CLASS].",
    "a low resolution photo of the [CLASS].",
    "a rendering of a [CLASS].",
    "graffiti of a [CLASS].",
    "a bad photo of the [CLASS].",
    "a cropped photo of the [CLASS].",
    "a tattoo of a [CLASS].",
    "the embroidered [CLASS].",
    "a photo of a hard to see [CLASS].",
    "a bright photo of a [CLASS].",
    "a photo of a clean [CLASS].",
    "a photo of a dirty [CLASS].",
    "a dark photo of the [CLASS].",
    "a drawing of a [CLASS].",
    "a photo of my [CLASS].",
    "the plastic [CLASS].",
    "a photo of the cool [CLASS].",
    "a close-up photo of a [CLASS].",
    "a black and white photo of the [CLASS].",
    "a painting of the [CLASS].",
    "a painting of a [CLASS].",
    "a pixelated photo of the [CLASS].",
    "a sculpture of the [CLASS].",
    "a bright photo of the [CLASS].",
    "a cropped photo of a [CLASS].",
    "a plastic [CLASS].",
    "a photo of the dirty [CLASS].",
    "a jpeg corrupted photo of a [CLASS].",
    "a blurry photo of the [CLASS].",
    "a photo of the [CLASS].",
    "a good photo of the [CLASS].",
    "a rendering of the [CLASS].",
    "a [CLASS] in a video game.",
    "a photo of one [CLASS].",
    "a doodle of a [CLASS].",
    "a close-up photo of the [CLASS].",
    "a photo of a [CLASS].",
    "the origami [CLASS].",
    "the [CLASS] in a video game.",
    "a sketch of a [CLASS].",
    "a doodle of the [CLASS].",
    "an origami [CLASS].",
    "a low resolution photo of a [CLASS].",
    "the toy [CLASS].",
    "a rendition of the [CLASS].",
    "a photo of the clean [CLASS].",
    "a photo of a large [CLASS].",
    "a rendition of a [CLASS].",
    "a photo of a nice [CLASS].",
    "a photo of a weird [CLASS].",
    "a blurry photo of a [CLASS].",
    "a cartoon [CLASS].",
    "art of a [CLASS].",
    "a sketch of the [CLASS].",
    "an embroidered [CLASS].",
    "a pixelated photo of a [CLASS].",
    "itap of the [CLASS].",
    "a jpeg corrupted photo of the [CLASS].",
    "a good photo of a [CLASS].",
    "a plushie [CLASS].",
    "a photo of the nice [CLASS].",
    "a photo of the small [CLASS].",
    "a photo of the weird [CLASS].",
    "the cartoon [CLASS].",
    "art of the [CLASS].",
    "a drawing of the [CLASS].",
    "a photo of the large [CLASS].",
    "a black and white photo of a [CLASS].",
    "the plushie [CLASS].",
    "a dark photo of a [CLASS].",
    "itap of a [CLASS].",
    "graffiti of the [CLASS].",
    "a toy [CLASS].",
    "itap of my [CLASS].",
    "a photo of a cool [CLASS].",
    "a photo of a small [CLASS].",
    "a tattoo of the [CLASS].",
];

/// Replaces the single `[CLASS]` placeholder in `template` with `class_name`.
pub fn instantiate(template: &str, class_name: &str) -> String {
    template.replacen(CLASS_TOKEN, class_name, 1)
}

/// Benchmark datasets with published group structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Benchmark {
    Waterbirds,
    CelebA,
    Pacs,
    Vlcs,
}

#[derive(Debug, Clone, Copy)]
pub struct DatasetInfo {
    pub name: &'static str,
    pub groups: &'static [&'static str],
    pub test_samples: usize,
    pub classes: &'static [&'static str],
}

impl Benchmark {
    pub const ALL: [Benchmark; 4] = [
        Benchmark::Waterbirds,
        Benchmark::CelebA,
        Benchmark::Pacs,
        Benchmark::Vlcs,
    ];

    pub fn info(self) -> DatasetInfo {
        match self {
            Benchmark::Waterbirds => DatasetInfo {
                name: "Waterbirds",
                groups: &[
                    "landbird in land",
                    "landbird in water",
                    "waterbird on land",
                    "waterbird on water",
                ],
                test_samples: 5794,
                classes: &["landbird", "waterbird"],
            },
            Benchmark::CelebA => DatasetInfo {
                name: "CelebA",
                groups: &[
                    "male & not blond",
                    "female & not blond",
                    "male & blond",
                    "female & blond",
                ],
                test_samples: 19962,
                classes: &["not blond", "blond"],
            },
            Benchmark::Pacs => DatasetInfo {
                name: "PACS",
                groups: &["art", "cartoons", "photos", "sketches"],
                test_samples: 9991,
                classes: &["dog", "elephant", "giraffe", "guitar", "horse", "house", "person"],
            },
            Benchmark::Vlcs => DatasetInfo {
                name: "VLCS",
                groups: &["Caltech101", "LabelMe", "SUN09", "VOC2007"],
                test_samples: 10725,
                classes: &["bird", "car", "chair", "dog", "person"],
            },
        }
    }

    /// Class descriptions used by the single-prompt zero-shot baseline.
    /// PACS and VLCS use the bare class names.
    pub fn vanilla_prompts(self) -> Vec<String> {
        match self {
            Benchmark::Waterbirds => vec!["an image of landbird".into(), "an image of waterbird".into()],
            Benchmark::CelebA => vec!["person with dark hair".into(), "person with blond hair".into()],
            Benchmark::Pacs | Benchmark::Vlcs => {
                self.info().classes.iter().map(|c| c.to_string()).collect()
            }
        }
    }
}
