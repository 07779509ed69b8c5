/** Labeled item gallery standing in for a live camera.
 *
 * Each entry carries a synthetic image whose payload embeds the item's
 * true bin, which the simulated classifier reads. Coffee cups are mixed
 * paper and plastic and belong in the yellow bin under local rules.
 */

export interface GalleryItem {
  id: number;
  label: string;
  bin: "blue" | "yellow" | "brown";
  imageB64: string;
}

function entry(id: number, label: string, bin: GalleryItem["bin"]): GalleryItem {
  return { id, label, bin, imageB64: btoa(`item:${id}:${bin}`) };
}

export const GALLERY: GalleryItem[] = [
  entry(1, "newspaper", "blue"),
  entry(2, "cardboard box", "blue"),
  entry(3, "plastic bottle", "yellow"),
  entry(4, "coffee cup", "yellow"),
  entry(5, "banana peel", "brown"),
  entry(6, "apple core", "brown"),
];

export function slug(label: string): string {
  return label.replace(/\s+/g, "-");
}
