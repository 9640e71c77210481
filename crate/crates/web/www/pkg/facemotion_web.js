/**
 * One blob tracked between two rendered frames.
 */
export class BlobTrack {
    static __wrap(ptr) {
        const obj = Object.create(BlobTrack.prototype);
        obj.__wbg_ptr = ptr;
        BlobTrackFinalization.register(obj, obj.__wbg_ptr, obj);
        return obj;
    }
    __destroy_into_raw() {
        const ptr = this.__wbg_ptr;
        this.__wbg_ptr = 0;
        BlobTrackFinalization.unregister(this);
        return ptr;
    }
    free() {
        const ptr = this.__destroy_into_raw();
        wasm.__wbg_blobtrack_free(ptr, 0);
    }
    /**
     * Round-trip error in pixels; infinite when a solve failed.
     * @returns {number}
     */
    fb_error() {
        const ret = wasm.blobtrack_fb_error(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {Uint8Array}
     */
    next_pixels() {
        const ret = wasm.blobtrack_next_pixels(this.__wbg_ptr);
        var v1 = getArrayU8FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 1, 1);
        return v1;
    }
    /**
     * @returns {Uint8Array}
     */
    prev_pixels() {
        const ret = wasm.blobtrack_prev_pixels(this.__wbg_ptr);
        var v1 = getArrayU8FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 1, 1);
        return v1;
    }
    /**
     * @returns {number}
     */
    size() {
        const ret = wasm.blobtrack_size(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * @returns {number}
     */
    u() {
        const ret = wasm.blobtrack_u(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {number}
     */
    v() {
        const ret = wasm.blobtrack_v(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {boolean}
     */
    valid() {
        const ret = wasm.blobtrack_valid(this.__wbg_ptr);
        return ret !== 0;
    }
}
if (Symbol.dispose) BlobTrack.prototype[Symbol.dispose] = BlobTrack.prototype.free;

/**
 * A calibrated synthetic sequence with its truth and raw detections.
 */
export class CalibrationRun {
    static __wrap(ptr) {
        const obj = Object.create(CalibrationRun.prototype);
        obj.__wbg_ptr = ptr;
        CalibrationRunFinalization.register(obj, obj.__wbg_ptr, obj);
        return obj;
    }
    __destroy_into_raw() {
        const ptr = this.__wbg_ptr;
        this.__wbg_ptr = 0;
        CalibrationRunFinalization.unregister(this);
        return ptr;
    }
    free() {
        const ptr = this.__destroy_into_raw();
        wasm.__wbg_calibrationrun_free(ptr, 0);
    }
    /**
     * @returns {Float64Array}
     */
    calibrated() {
        const ret = wasm.calibrationrun_calibrated(this.__wbg_ptr);
        var v1 = getArrayF64FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 8, 8);
        return v1;
    }
    /**
     * @returns {number}
     */
    calibrated_error() {
        const ret = wasm.calibrationrun_calibrated_error(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {number}
     */
    frame_count() {
        const ret = wasm.calibrationrun_frame_count(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * @param {number} index
     * @returns {Uint8Array}
     */
    frame_pixels(index) {
        const ret = wasm.calibrationrun_frame_pixels(this.__wbg_ptr, index);
        var v1 = getArrayU8FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 1, 1);
        return v1;
    }
    /**
     * @returns {number}
     */
    height() {
        const ret = wasm.calibrationrun_height(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * @returns {number}
     */
    landmarks() {
        const ret = wasm.calibrationrun_landmarks(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * @returns {Float64Array}
     */
    raw() {
        const ret = wasm.calibrationrun_raw(this.__wbg_ptr);
        var v1 = getArrayF64FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 8, 8);
        return v1;
    }
    /**
     * @returns {number}
     */
    raw_error() {
        const ret = wasm.calibrationrun_raw_error(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {number}
     */
    rejected() {
        const ret = wasm.calibrationrun_rejected(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * Frame-major `x, y` pairs.
     * @returns {Float64Array}
     */
    truth() {
        const ret = wasm.calibrationrun_truth(this.__wbg_ptr);
        var v1 = getArrayF64FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 8, 8);
        return v1;
    }
    /**
     * @returns {number}
     */
    width() {
        const ret = wasm.calibrationrun_width(this.__wbg_ptr);
        return ret >>> 0;
    }
}
if (Symbol.dispose) CalibrationRun.prototype[Symbol.dispose] = CalibrationRun.prototype.free;

/**
 * Gaussian pyramid of one rendered face.
 */
export class PyramidView {
    static __wrap(ptr) {
        const obj = Object.create(PyramidView.prototype);
        obj.__wbg_ptr = ptr;
        PyramidViewFinalization.register(obj, obj.__wbg_ptr, obj);
        return obj;
    }
    __destroy_into_raw() {
        const ptr = this.__wbg_ptr;
        this.__wbg_ptr = 0;
        PyramidViewFinalization.unregister(this);
        return ptr;
    }
    free() {
        const ptr = this.__destroy_into_raw();
        wasm.__wbg_pyramidview_free(ptr, 0);
    }
    /**
     * @param {number} level
     * @returns {number}
     */
    height(level) {
        const ret = wasm.pyramidview_height(this.__wbg_ptr, level);
        return ret >>> 0;
    }
    /**
     * @returns {number}
     */
    level_count() {
        const ret = wasm.pyramidview_level_count(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * @param {number} level
     * @returns {Uint8Array}
     */
    pixels(level) {
        const ret = wasm.pyramidview_pixels(this.__wbg_ptr, level);
        var v1 = getArrayU8FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 1, 1);
        return v1;
    }
    /**
     * @param {number} level
     * @returns {number}
     */
    width(level) {
        const ret = wasm.pyramidview_width(this.__wbg_ptr, level);
        return ret >>> 0;
    }
}
if (Symbol.dispose) PyramidView.prototype[Symbol.dispose] = PyramidView.prototype.free;

/**
 * @param {number} seed
 * @param {number} levels
 * @param {number} scale_factor
 * @returns {PyramidView}
 */
export function pyramid_view(seed, levels, scale_factor) {
    const ret = wasm.pyramid_view(seed, levels, scale_factor);
    if (ret[2]) {
        throw takeFromExternrefTable0(ret[1]);
    }
    return PyramidView.__wrap(ret[0]);
}

/**
 * Generates a jittered sequence and calibrates it with process noise `q`
 * and detector noise `r`.
 * @param {number} seed
 * @param {number} num_frames
 * @param {number} jitter
 * @param {number} outlier_rate
 * @param {number} q
 * @param {number} r
 * @returns {CalibrationRun}
 */
export function run_calibration(seed, num_frames, jitter, outlier_rate, q, r) {
    const ret = wasm.run_calibration(seed, num_frames, jitter, outlier_rate, q, r);
    if (ret[2]) {
        throw takeFromExternrefTable0(ret[1]);
    }
    return CalibrationRun.__wrap(ret[0]);
}

/**
 * Renders a blob at `(x, y)` and at `(x + dx, y + dy)` on a `size`² canvas
 * and tracks it with the forward-backward check.
 * @param {number} size
 * @param {number} x
 * @param {number} y
 * @param {number} dx
 * @param {number} dy
 * @param {number} levels
 * @param {number} tau
 * @returns {BlobTrack}
 */
export function track_blob(size, x, y, dx, dy, levels, tau) {
    const ret = wasm.track_blob(size, x, y, dx, dy, levels, tau);
    if (ret[2]) {
        throw takeFromExternrefTable0(ret[1]);
    }
    return BlobTrack.__wrap(ret[0]);
}
function __wbg_get_imports() {
    const import0 = {
        __proto__: null,
        __wbg___wbindgen_throw_344f42d3211c4765: function(arg0, arg1) {
            throw new Error(getStringFromWasm0(arg0, arg1));
        },
        __wbindgen_cast_0000000000000001: function(arg0, arg1) {
            // Cast intrinsic for `Ref(String) -> Externref`.
            const ret = getStringFromWasm0(arg0, arg1);
            return ret;
        },
        __wbindgen_init_externref_table: function() {
            const table = wasm.__wbindgen_externrefs;
            const offset = table.grow(4);
            table.set(0, undefined);
            table.set(offset + 0, undefined);
            table.set(offset + 1, null);
            table.set(offset + 2, true);
            table.set(offset + 3, false);
        },
    };
    return {
        __proto__: null,
        "./facemotion_web_bg.js": import0,
    };
}

const BlobTrackFinalization = (typeof FinalizationRegistry === 'undefined')
    ? { register: () => {}, unregister: () => {} }
    : new FinalizationRegistry(ptr => wasm.__wbg_blobtrack_free(ptr, 1));
const CalibrationRunFinalization = (typeof FinalizationRegistry === 'undefined')
    ? { register: () => {}, unregister: () => {} }
    : new FinalizationRegistry(ptr => wasm.__wbg_calibrationrun_free(ptr, 1));
const PyramidViewFinalization = (typeof FinalizationRegistry === 'undefined')
    ? { register: () => {}, unregister: () => {} }
    : new FinalizationRegistry(ptr => wasm.__wbg_pyramidview_free(ptr, 1));

function getArrayF64FromWasm0(ptr, len) {
    ptr = ptr >>> 0;
    return getFloat64ArrayMemory0().subarray(ptr / 8, ptr / 8 + len);
}

function getArrayU8FromWasm0(ptr, len) {
    ptr = ptr >>> 0;
    return getUint8ArrayMemory0().subarray(ptr / 1, ptr / 1 + len);
}

let cachedFloat64ArrayMemory0 = null;
function getFloat64ArrayMemory0() {
    if (cachedFloat64ArrayMemory0 === null || cachedFloat64ArrayMemory0.byteLength === 0) {
        cachedFloat64ArrayMemory0 = new Float64Array(wasm.memory.buffer);
    }
    return cachedFloat64ArrayMemory0;
}

function getStringFromWasm0(ptr, len) {
    return decodeText(ptr >>> 0, len);
}

let cachedUint8ArrayMemory0 = null;
function getUint8ArrayMemory0() {
    if (cachedUint8ArrayMemory0 === null || cachedUint8ArrayMemory0.byteLength === 0) {
        cachedUint8ArrayMemory0 = new Uint8Array(wasm.memory.buffer);
    }
    return cachedUint8ArrayMemory0;
}

function takeFromExternrefTable0(idx) {
    const value = wasm.__wbindgen_externrefs.get(idx);
    wasm.__externref_table_dealloc(idx);
    return value;
}

let cachedTextDecoder = new TextDecoder('utf-8', { ignoreBOM: true, fatal: true });
cachedTextDecoder.decode();
const MAX_SAFARI_DECODE_BYTES = 2146435072;
let numBytesDecoded = 0;
function decodeText(ptr, len) {
    numBytesDecoded += len;
    if (numBytesDecoded >= MAX_SAFARI_DECODE_BYTES) {
        cachedTextDecoder = new TextDecoder('utf-8', { ignoreBOM: true, fatal: true });
        cachedTextDecoder.decode();
        numBytesDecoded = len;
    }
    return cachedTextDecoder.decode(getUint8ArrayMemory0().subarray(ptr, ptr + len));
}

let wasmModule, wasmInstance, wasm;
function __wbg_finalize_init(instance, module) {
    wasmInstance = instance;
    wasm = instance.exports;
    wasmModule = module;
    cachedFloat64ArrayMemory0 = null;
    cachedUint8ArrayMemory0 = null;
    wasm.__wbindgen_start();
    return wasm;
}

async function __wbg_load(module, imports) {
    if (typeof Response === 'function' && module instanceof Response) {
        if (typeof WebAssembly.instantiateStreaming === 'function') {
            try {
                return await WebAssembly.instantiateStreaming(module, imports);
            } catch (e) {
                const validResponse = module.ok && expectedResponseType(module.type);

                if (validResponse && module.headers.get('Content-Type') !== 'application/wasm') {
                    console.warn("`WebAssembly.instantiateStreaming` failed because your server does not serve Wasm with `application/wasm` MIME type. Falling back to `WebAssembly.instantiate` which is slower. Original error:\n", e);

                } else { throw e; }
            }
        }

        const bytes = await module.arrayBuffer();
        return await WebAssembly.instantiate(bytes, imports);
    } else {
        const instance = await WebAssembly.instantiate(module, imports);

        if (instance instanceof WebAssembly.Instance) {
            return { instance, module };
        } else {
            return instance;
        }
    }

    function expectedResponseType(type) {
        switch (type) {
            case 'basic': case 'cors': case 'default': return true;
        }
        return false;
    }
}

function initSync(module) {
    if (wasm !== undefined) return wasm;


    if (module !== undefined) {
        if (Object.getPrototypeOf(module) === Object.prototype) {
            ({module} = module)
        } else {
            console.warn('using deprecated parameters for `initSync()`; pass a single object instead')
        }
    }

    const imports = __wbg_get_imports();
    if (!(module instanceof WebAssembly.Module)) {
        module = new WebAssembly.Module(module);
    }
    const instance = new WebAssembly.Instance(module, imports);
    return __wbg_finalize_init(instance, module);
}

async function __wbg_init(module_or_path) {
    if (wasm !== undefined) return wasm;


    if (module_or_path !== undefined) {
        if (Object.getPrototypeOf(module_or_path) === Object.prototype) {
            ({module_or_path} = module_or_path)
        } else {
            console.warn('using deprecated parameters for the initialization function; pass a single object instead')
        }
    }

    if (module_or_path === undefined) {
        module_or_path = new URL('facemotion_web_bg.wasm', import.meta.url);
    }
    const imports = __wbg_get_imports();

    if (typeof module_or_path === 'string' || (typeof Request === 'function' && module_or_path instanceof Request) || (typeof URL === 'function' && module_or_path instanceof URL)) {
        module_or_path = fetch(module_or_path);
    }

    const { instance, module } = await __wbg_load(await module_or_path, imports);

    return __wbg_finalize_init(instance, module);
}

export { initSync, __wbg_init as default };
