//! Connected-component labeling (8-connectivity).

use super::BinaryImage;

/// Foreground component labeling. Label 0 is background; labels start at 1 in
/// scan order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabeling {
    /// Per-pixel component id, row-major; 0 = background.
    pub labels: Vec<u32>,
    /// Pixel count per id; index 0 (background) is unused and holds 0.
    pub component_sizes: Vec<usize>,
    /// Id of the largest component; ties break toward the smallest id.
    /// `None` when the image has no foreground.
    pub largest_id: Option<u32>,
}

impl ComponentLabeling {
    pub fn component_count(&self) -> usize {
        self.component_sizes.len().saturating_sub(1)
    }

    /// Bounding box `(x0, y0, x1, y1)` (inclusive) of a component.
    pub fn bounding_box(&self, id: u32, width: usize) -> Option<(usize, usize, usize, usize)> {
        let mut bb: Option<(usize, usize, usize, usize)> = None;
        for (i, &l) in self.labels.iter().enumerate() {
            if l == id {
                let (x, y) = (i % width, i / width);
                bb = Some(match bb {
                    None => (x, y, x, y),
                    Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
                });
            }
        }
        bb
    }
}

/// Labels 8-connected foreground regions.
pub fn connected_components(bin: &BinaryImage) -> ComponentLabeling {
    let w = bin.width();
    let h = bin.height();
    let mut labels = vec![0u32; w * h];
    let mut sizes = vec![0usize];
    let mut next = 1u32;
    let mut stack = Vec::new();

    for start in 0..w * h {
        if labels[start] != 0 || bin.as_slice()[start] != 255 {
            continue;
        }
        let id = next;
        next += 1;
        let mut size = 0usize;
        stack.push(start);
        labels[start] = id;
        while let Some(i) = stack.pop() {
            size += 1;
            let (x, y) = (i % w, i / w);
            for dy in -1i32..=1 {
                for dx in -1i32..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let nx = x as i32 + dx;
                    let ny = y as i32 + dy;
                    if nx < 0 || ny < 0 || nx >= w as i32 || ny >= h as i32 {
                        continue;
                    }
                    let ni = ny as usize * w + nx as usize;
                    if labels[ni] == 0 && bin.as_slice()[ni] == 255 {
                        labels[ni] = id;
                        stack.push(ni);
                    }
                }
            }
        }
        sizes.push(size);
    }

    let largest_id = sizes
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(id, _)| id as u32);

    ComponentLabeling {
        labels,
        component_sizes: sizes,
        largest_id,
    }
}
