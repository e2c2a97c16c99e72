/**
 * The wasm backend ships forward kernels plus most gradients but omits
 * Conv2DBackpropFilter, which blocks training any convolutional model.
 * The filter gradient is itself a convolution: with the batch axis played
 * as the reduction (input-channel) axis and the upstream gradient played
 * as the filter, dilated by the forward stride,
 *
 *   dW[kh, kw, ci, co] = sum_{b, p, q} x[b, p*s + kh - padTop, ...] * dy[b, p, q, co]
 *
 * so it composes from transpose / pad / slice / conv2d, all of which the
 * wasm backend provides (XNNPACK-accelerated).
 */

import * as tf from '@tensorflow/tfjs';

type Pad2d = 'valid' | 'same' | number | tf.backend_util.ExplicitPadding;

function forwardPadding(
  pad: Pad2d,
  inSize: number,
  outSize: number,
  filterSize: number,
  stride: number,
  axis: 1 | 2,
): number {
  if (pad === 'valid') return 0;
  if (typeof pad === 'number') return pad;
  if (pad === 'same') {
    const total = Math.max((outSize - 1) * stride + filterSize - inSize, 0);
    return Math.floor(total / 2);
  }
  return pad[axis][0];
}

/** dW of a NHWC conv2d, via a stride-dilated convolution of x with dy. */
export function conv2dFilterGradient(
  x: tf.Tensor4D,
  dy: tf.Tensor4D,
  filterShape: [number, number, number, number],
  strides: [number, number] | number,
  pad: Pad2d,
): tf.Tensor4D {
  const [sH, sW] = typeof strides === 'number' ? [strides, strides] : strides;
  const [, h, w] = x.shape;
  const [, oh, ow] = dy.shape;
  const [kh, kw] = filterShape;
  const padTop = forwardPadding(pad, h, oh, kh, sH, 1);
  const padLeft = forwardPadding(pad, w, ow, kw, sW, 2);
  // the dilated-filter window must cover exactly kh x kw output positions
  const targetH = kh + (oh - 1) * sH;
  const targetW = kw + (ow - 1) * sW;

  return tf.tidy(() => {
    let xt = tf.transpose(x, [3, 1, 2, 0]); // [CI, H, W, B]
    const padBottom = targetH - h - padTop;
    const padRight = targetW - w - padLeft;
    if (padBottom < 0 || padRight < 0) {
      // valid forward conv can leave unused rows/columns; crop them
      xt = tf.slice(
        xt,
        [0, 0, 0, 0],
        [xt.shape[0], Math.min(targetH, h), Math.min(targetW, w), xt.shape[3]],
      );
    }
    const padded = tf.pad(xt, [
      [0, 0],
      [padTop, Math.max(padBottom, 0)],
      [padLeft, Math.max(padRight, 0)],
      [0, 0],
    ]);
    const filter = tf.transpose(dy, [1, 2, 0, 3]); // [OH, OW, B, CO]
    const out = tf.conv2d(
      padded as tf.Tensor4D,
      filter as tf.Tensor4D,
      1,
      'valid',
      'NHWC',
      [sH, sW],
    ); // [CI, KH, KW, CO]
    return tf.transpose(out, [1, 2, 0, 3]) as tf.Tensor4D;
  });
}

let registered = false;

export function registerWasmKernels(): void {
  if (registered || tf.getKernel('Conv2DBackpropFilter', 'wasm')) return;
  tf.registerKernel({
    kernelName: 'Conv2DBackpropFilter',
    backendName: 'wasm',
    kernelFunc: ({ inputs, attrs }) => {
      const { x, dy } = inputs as { x: tf.Tensor4D; dy: tf.Tensor4D };
      const a = attrs as unknown as {
        strides: [number, number] | number;
        pad: Pad2d;
        dataFormat: string;
        filterShape: [number, number, number, number];
      };
      if (a.dataFormat !== 'NHWC') {
        throw new Error(`Conv2DBackpropFilter: unsupported format ${a.dataFormat}`);
      }
      return conv2dFilterGradient(x, dy, a.filterShape, a.strides, a.pad);
    },
  });
  registered = true;
}
